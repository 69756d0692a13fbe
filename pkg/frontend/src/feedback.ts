/**
 * Feedback assignment: accept or correct the suggestion, mark rationale
 * spans, submit.
 *
 * Corrections go through per-word drop-downs over the served label set;
 * every choice is routed through applyWordTag so the tag array stays a
 * consistent B/I run (entity edits, not raw tag edits). Rationales are
 * click-drag ranges over the same strip; overlaps are refused inline.
 * Which feedback path the annotator used (accept, reject, drop-down,
 * rationale) is kept per instance for later analysis.
 */

import type { FeedbackAck, FeedbackRequest, SamplePayload } from './api.js';
import {
  applyWordTag,
  clearSpan,
  countEdits,
  overlapsAny,
  spansFromTags,
  type EntitySpan,
  type Span,
} from './tags.js';

export interface FeedbackOptions {
  onSubmit: (request: FeedbackRequest) => Promise<FeedbackAck>;
  onAck?: (ack: FeedbackAck) => void;
  now?: () => number;
}

export class FeedbackView {
  readonly element: HTMLElement;
  tags: string[];
  rationales: Span[] = [];
  /** Feedback paths used on this instance, in order. */
  interactions: string[] = [];
  ack: FeedbackAck | null = null;

  private sample: SamplePayload;
  private options: FeedbackOptions;
  private startedAt: number;
  private accepted = new Set<string>();
  private rationaleError: string | null = null;
  private submitError: string | null = null;
  private submitting = false;
  private dragAnchor: number | null = null;
  private dragHover: number | null = null;

  constructor(sample: SamplePayload, options: FeedbackOptions) {
    this.sample = sample;
    this.options = options;
    this.tags = [...sample.suggested_word_tags];
    const now = options.now ?? (() => Date.now() / 1000);
    this.startedAt = now();

    this.element = document.createElement('section');
    this.element.className = 'feedback';
    document.addEventListener('mouseup', () => this.finishDrag());
    this.render();
  }

  editCount(): number {
    return countEdits(this.sample.suggested_word_tags, this.tags);
  }

  applyDropdown(at: number, chosen: string): void {
    if (this.ack !== null) {
      return;
    }
    this.tags = applyWordTag(this.tags, at, chosen);
    this.interactions.push('dropdown');
    this.rationaleError = null;
    this.render();
  }

  acceptSpan(span: EntitySpan): void {
    this.accepted.add(spanKey(span));
    this.interactions.push('accept');
    this.render();
  }

  rejectSpan(span: EntitySpan): void {
    this.tags = clearSpan(this.tags, span);
    this.accepted.delete(spanKey(span));
    this.interactions.push('reject');
    this.render();
  }

  acceptAll(): void {
    if (this.ack !== null) {
      return;
    }
    this.tags = [...this.sample.suggested_word_tags];
    for (const span of spansFromTags(this.tags)) {
      this.accepted.add(spanKey(span));
    }
    this.interactions.push('accept');
    this.render();
  }

  /** Returns false (and shows why) when the candidate overlaps an existing span. */
  addRationale(span: Span): boolean {
    if (overlapsAny(this.rationales, span)) {
      this.rationaleError = 'that range overlaps a rationale you already marked';
      this.render();
      return false;
    }
    this.rationales.push(span);
    this.rationales.sort((a, b) => a.start - b.start);
    this.interactions.push('rationale');
    this.rationaleError = null;
    this.render();
    return true;
  }

  removeRationale(index: number): void {
    this.rationales.splice(index, 1);
    this.rationaleError = null;
    this.render();
  }

  buildRequest(): FeedbackRequest {
    const comment = this.commentText();
    const request: FeedbackRequest = {
      instance_id: this.sample.instance.id,
      final_tags: [...this.tags],
      rationale_spans: this.rationales.map((s) => [s.start, s.end] as [number, number]),
      suggestion_theta_version: this.sample.theta_version,
      started_at: this.startedAt,
    };
    if (comment !== '') {
      request.comment = comment;
    }
    return request;
  }

  async submit(): Promise<FeedbackAck | null> {
    // the server deduplicates resubmits too, but never fire the second request
    if (this.submitting || this.ack !== null) {
      return null;
    }
    this.submitting = true;
    this.submitError = null;
    this.render();
    try {
      const ack = await this.options.onSubmit(this.buildRequest());
      this.ack = ack;
      console.debug(
        `feedback for ${this.sample.instance.id} used paths:`,
        this.interactions.join(',') || 'accept-as-is',
      );
      this.options.onAck?.(ack);
      return ack;
    } catch (err) {
      this.submitError = err instanceof Error ? err.message : String(err);
      return null;
    } finally {
      this.submitting = false;
      this.render();
    }
  }

  private commentText(): string {
    const area = this.element.querySelector<HTMLTextAreaElement>('.comment-box');
    return area ? area.value.trim() : '';
  }

  private startDrag(word: number): void {
    if (this.ack !== null) {
      return;
    }
    this.dragAnchor = word;
    this.dragHover = word;
    this.paintDrag();
  }

  private extendDrag(word: number): void {
    if (this.dragAnchor === null) {
      return;
    }
    this.dragHover = word;
    this.paintDrag();
  }

  private finishDrag(): void {
    if (this.dragAnchor === null) {
      return;
    }
    const a = this.dragAnchor;
    const b = this.dragHover ?? a;
    this.dragAnchor = null;
    this.dragHover = null;
    this.addRationale({ start: Math.min(a, b), end: Math.max(a, b) });
  }

  private paintDrag(): void {
    const a = this.dragAnchor;
    const b = this.dragHover;
    if (a === null || b === null) {
      return;
    }
    const lo = Math.min(a, b);
    const hi = Math.max(a, b);
    this.element.querySelectorAll<HTMLElement>('.edit-token').forEach((node) => {
      const w = Number(node.dataset.word);
      node.classList.toggle('drag-mark', w >= lo && w <= hi);
    });
  }

  private render(): void {
    const comment = this.commentText();
    this.element.textContent = '';

    const head = document.createElement('div');
    head.className = 'feedback-head';
    const title = document.createElement('span');
    title.textContent = 'Your annotation';
    const counter = document.createElement('span');
    counter.className = 'edit-count';
    counter.textContent = `edits so far: ${this.editCount()}`;
    head.append(title, counter);
    this.element.appendChild(head);

    this.element.appendChild(this.renderStrip());
    this.element.appendChild(this.renderEntities());
    this.element.appendChild(this.renderRationales());

    const commentRow = document.createElement('div');
    commentRow.className = 'comment-row';
    const area = document.createElement('textarea');
    area.className = 'comment-box';
    area.placeholder = 'optional note for the project owner';
    area.value = comment;
    area.disabled = this.ack !== null;
    commentRow.appendChild(area);
    this.element.appendChild(commentRow);

    const row = document.createElement('div');
    row.className = 'submit-row';
    const acceptAll = document.createElement('button');
    acceptAll.className = 'accept-all';
    acceptAll.textContent = 'Accept all suggestions';
    acceptAll.disabled = this.submitting || this.ack !== null;
    acceptAll.addEventListener('click', () => this.acceptAll());
    const submit = document.createElement('button');
    submit.className = 'submit-btn';
    submit.textContent = this.submitting ? 'Submitting...' : 'Submit annotation';
    submit.disabled = this.submitting || this.ack !== null;
    submit.addEventListener('click', () => {
      void this.submit();
    });
    row.append(acceptAll, submit);
    this.element.appendChild(row);

    if (this.submitError !== null) {
      const err = document.createElement('div');
      err.className = 'submit-error';
      err.textContent = this.submitError;
      this.element.appendChild(err);
    }
    if (this.ack !== null) {
      this.element.appendChild(this.renderAck(this.ack));
    }
  }

  private renderStrip(): HTMLElement {
    const strip = document.createElement('div');
    strip.className = 'edit-strip';
    for (let w = 0; w < this.sample.instance.words.length; w++) {
      const token = document.createElement('span');
      token.className = 'edit-token';
      token.dataset.word = String(w);
      if (this.rationales.some((s) => w >= s.start && w <= s.end)) {
        token.classList.add('rationale-mark');
      }

      const text = document.createElement('span');
      text.className = 'edit-word';
      text.textContent = this.sample.instance.words[w];
      token.appendChild(text);

      const pick = document.createElement('select');
      pick.className = 'tag-pick';
      for (const tag of this.sample.decode_tags) {
        const option = document.createElement('option');
        option.value = tag;
        option.textContent = tag;
        pick.appendChild(option);
      }
      pick.value = this.tags[w];
      pick.disabled = this.ack !== null;
      pick.addEventListener('change', () => this.applyDropdown(w, pick.value));
      token.appendChild(pick);

      token.addEventListener('mousedown', (event) => {
        const target = event.target as HTMLElement;
        if (target.tagName === 'SELECT' || target.tagName === 'OPTION') {
          return;
        }
        this.startDrag(w);
      });
      token.addEventListener('mouseover', () => this.extendDrag(w));
      strip.appendChild(token);
    }
    return strip;
  }

  private renderEntities(): HTMLElement {
    const panel = document.createElement('div');
    panel.className = 'entity-panel';
    const spans = spansFromTags(this.tags);
    if (spans.length === 0) {
      const none = document.createElement('div');
      none.className = 'entity-none';
      none.textContent = 'no entities in the current annotation';
      panel.appendChild(none);
      return panel;
    }
    for (const span of spans) {
      const row = document.createElement('div');
      row.className = 'entity-row';
      const chip = document.createElement('span');
      chip.className = this.accepted.has(spanKey(span)) ? 'entity-chip accepted' : 'entity-chip';
      const words = this.sample.instance.words.slice(span.start, span.end + 1).join(' ');
      chip.textContent = `${span.type}: ${words}`;
      row.appendChild(chip);

      const keep = document.createElement('button');
      keep.className = 'accept-btn';
      keep.textContent = 'correct';
      keep.disabled = this.ack !== null;
      keep.addEventListener('click', () => this.acceptSpan(span));
      const drop = document.createElement('button');
      drop.className = 'reject-btn';
      drop.textContent = 'not an entity';
      drop.disabled = this.ack !== null;
      drop.addEventListener('click', () => this.rejectSpan(span));
      row.append(keep, drop);
      panel.appendChild(row);
    }
    return panel;
  }

  private renderRationales(): HTMLElement {
    const panel = document.createElement('div');
    panel.className = 'rationale-panel';
    const note = document.createElement('div');
    note.className = 'rationale-note';
    note.textContent = 'drag across words to mark the span that justifies your decision';
    panel.appendChild(note);

    if (this.rationaleError !== null) {
      const err = document.createElement('div');
      err.className = 'rationale-error';
      err.textContent = this.rationaleError;
      panel.appendChild(err);
    }

    const list = document.createElement('div');
    list.className = 'rationale-list';
    this.rationales.forEach((span, index) => {
      const chip = document.createElement('span');
      chip.className = 'rationale-chip';
      chip.dataset.span = `${span.start}-${span.end}`;
      const words = this.sample.instance.words.slice(span.start, span.end + 1).join(' ');
      chip.textContent = words;
      const remove = document.createElement('button');
      remove.className = 'remove-rationale';
      remove.textContent = 'x';
      remove.disabled = this.ack !== null;
      remove.addEventListener('click', () => this.removeRationale(index));
      chip.appendChild(remove);
      list.appendChild(chip);
    });
    panel.appendChild(list);
    return panel;
  }

  private renderAck(ack: FeedbackAck): HTMLElement {
    const panel = document.createElement('div');
    panel.className = 'ack-panel';
    panel.dataset.workload = String(ack.workload);
    panel.dataset.retraining = String(ack.retraining_started);
    const bits = [`accepted, ${ack.workload} correction${ack.workload === 1 ? '' : 's'} counted`];
    if (ack.stale) {
      bits.push('suggestion was stale (model moved on)');
    }
    if (ack.secondary) {
      bits.push('recorded as a second opinion');
    }
    if (ack.retraining_started) {
      bits.push('batch complete, retraining started');
    }
    panel.textContent = bits.join('  ·  ');
    return panel;
  }
}

function spanKey(span: EntitySpan): string {
  return `${span.start}:${span.end}:${span.type}`;
}
