/**
 * Single-page shell around the four views.
 *
 * Connect with a server URL and annotator token, then work the three
 * tabs: annotate (sample review plus feedback assignment for the
 * current lease), model (inspection curve), overview (task status).
 * Round transitions are polled optimistically; the waiting panels also
 * carry a manual check button so a session can be driven without
 * timers.
 */

import { ApiError, WorkbenchClient, type FeedbackAck, type FetchLike, type SamplePayload } from './api.js';
import { FeedbackView } from './feedback.js';
import { InspectionView } from './inspection.js';
import { renderOverview } from './overview.js';
import { renderReview } from './review.js';

export interface AppOptions {
  fetchFn?: FetchLike;
  /** Delay between automatic next-sample checks; 0 disables the timer. */
  pollMs?: number;
  now?: () => number;
}

const TAB_NAMES = ['annotate', 'model', 'overview'] as const;
type TabName = (typeof TAB_NAMES)[number];

export class WorkbenchApp {
  readonly element: HTMLElement;
  client: WorkbenchClient | null = null;
  readonly inspection: InspectionView;
  feedback: FeedbackView | null = null;

  private options: AppOptions;
  private connectPanel: HTMLElement;
  private connectError: HTMLElement;
  private session: HTMLElement;
  private projectLabel: HTMLElement;
  private panes: Record<TabName, HTMLElement>;
  private tabButtons: Record<TabName, HTMLButtonElement>;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(options: AppOptions = {}) {
    this.options = options;
    this.inspection = new InspectionView((mode) => {
      // persist the preference; the redraw above never waits for this
      this.client?.setMetricMode(mode).catch((err) => console.warn('metric mode not saved:', err));
    });

    this.element = document.createElement('div');
    this.element.className = 'workbench';

    this.connectPanel = document.createElement('div');
    this.connectPanel.className = 'connect-panel';
    const title = document.createElement('h1');
    title.textContent = 'Annotation workbench';
    const serverInput = document.createElement('input');
    serverInput.className = 'server-url';
    serverInput.placeholder = 'server URL, e.g. http://127.0.0.1:8000';
    serverInput.value = typeof window !== 'undefined' && window.location.origin.startsWith('http')
      ? window.location.origin
      : '';
    const tokenInput = document.createElement('input');
    tokenInput.className = 'token-input';
    tokenInput.type = 'password';
    tokenInput.placeholder = 'annotator token';
    const connectBtn = document.createElement('button');
    connectBtn.className = 'connect-btn';
    connectBtn.textContent = 'Connect';
    connectBtn.addEventListener('click', () => {
      void this.connect(serverInput.value.trim(), tokenInput.value.trim());
    });
    this.connectError = document.createElement('div');
    this.connectError.className = 'connect-error';
    this.connectPanel.append(title, serverInput, tokenInput, connectBtn, this.connectError);
    this.element.appendChild(this.connectPanel);

    this.session = document.createElement('div');
    this.session.className = 'session';
    this.session.style.display = 'none';

    const head = document.createElement('div');
    head.className = 'session-head';
    this.projectLabel = document.createElement('span');
    this.projectLabel.className = 'project-label';
    head.appendChild(this.projectLabel);
    const nav = document.createElement('nav');
    nav.className = 'tabs';
    this.tabButtons = {} as Record<TabName, HTMLButtonElement>;
    this.panes = {} as Record<TabName, HTMLElement>;
    for (const name of TAB_NAMES) {
      const button = document.createElement('button');
      button.className = 'tab-btn';
      button.dataset.tab = name;
      button.textContent = name;
      button.addEventListener('click', () => {
        void this.showTab(name);
      });
      nav.appendChild(button);
      this.tabButtons[name] = button;

      const pane = document.createElement('div');
      pane.className = `pane pane-${name}`;
      pane.style.display = 'none';
      this.panes[name] = pane;
    }
    head.appendChild(nav);
    this.session.appendChild(head);
    for (const name of TAB_NAMES) {
      this.session.appendChild(this.panes[name]);
    }
    this.element.appendChild(this.session);
  }

  async connect(baseUrl: string, token: string): Promise<boolean> {
    const client = new WorkbenchClient(baseUrl, token, this.options.fetchFn);
    try {
      const health = await client.health();
      this.client = client;
      this.projectLabel.textContent = `project ${health.project_id}`;
      this.connectError.textContent = '';
      this.connectPanel.style.display = 'none';
      this.session.style.display = '';
      await this.showTab('annotate');
      return true;
    } catch (err) {
      this.connectError.textContent =
        err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      return false;
    }
  }

  async showTab(name: TabName): Promise<void> {
    for (const tab of TAB_NAMES) {
      this.panes[tab].style.display = tab === name ? '' : 'none';
      this.tabButtons[tab].classList.toggle('active', tab === name);
    }
    if (name === 'annotate') {
      await this.refreshAnnotate();
    } else if (name === 'model') {
      await this.refreshModel();
    } else {
      await this.refreshOverview();
    }
  }

  async refreshAnnotate(): Promise<void> {
    if (this.client === null) {
      return;
    }
    this.clearPoll();
    const pane = this.panes.annotate;
    pane.textContent = 'loading...';
    let sample;
    try {
      sample = await this.client.nextSample();
    } catch (err) {
      this.renderAnnotateError(err);
      return;
    }
    pane.textContent = '';
    if (sample.status === 'ok') {
      this.renderSample(sample);
    } else if (sample.status === 'retraining') {
      this.renderWaiting('The model is retraining on the completed batch.');
    } else if (sample.status === 'round_drained') {
      this.renderWaiting('Every instance in this round is leased or submitted; waiting for the round to close.');
    } else {
      this.feedback = null;
      const banner = document.createElement('div');
      banner.className = 'stopped-banner';
      banner.textContent = `Annotation stopped: ${sample.reason}. See the overview tab for the final state.`;
      pane.appendChild(banner);
    }
  }

  async refreshModel(): Promise<void> {
    if (this.client === null) {
      return;
    }
    const pane = this.panes.model;
    try {
      this.inspection.setPayload(await this.client.modelInspection());
    } catch (err) {
      pane.textContent = '';
      pane.appendChild(errorLine(err));
      return;
    }
    if (this.inspection.element.parentElement !== pane) {
      pane.textContent = '';
      pane.appendChild(this.inspection.element);
    }
  }

  async refreshOverview(): Promise<void> {
    if (this.client === null) {
      return;
    }
    const pane = this.panes.overview;
    pane.textContent = '';
    try {
      pane.appendChild(renderOverview(await this.client.taskOverview()));
    } catch (err) {
      pane.appendChild(errorLine(err));
      return;
    }
    const actions = document.createElement('div');
    actions.className = 'overview-actions';
    const refresh = document.createElement('button');
    refresh.className = 'refresh-overview';
    refresh.textContent = 'Refresh';
    refresh.addEventListener('click', () => {
      void this.refreshOverview();
    });
    const save = document.createElement('button');
    save.className = 'save-project';
    save.textContent = 'Save project';
    save.addEventListener('click', () => {
      void this.client
        ?.save()
        .then(() => {
          save.textContent = 'Saved';
        })
        .catch((err) => {
          save.textContent = `save failed: ${err instanceof Error ? err.message : String(err)}`;
        });
    });
    actions.append(refresh, save);
    pane.appendChild(actions);
  }

  private renderSample(sample: SamplePayload): void {
    const pane = this.panes.annotate;
    pane.appendChild(renderReview(sample));
    this.feedback = new FeedbackView(sample, {
      onSubmit: (request) => {
        if (this.client === null) {
          return Promise.reject(new Error('not connected'));
        }
        return this.client.submitFeedback(request);
      },
      onAck: (ack) => this.afterAck(ack),
      now: this.options.now,
    });
    pane.appendChild(this.feedback.element);
  }

  private afterAck(ack: FeedbackAck): void {
    const pane = this.panes.annotate;
    const row = document.createElement('div');
    row.className = 'next-row';
    const next = document.createElement('button');
    next.className = 'next-btn';
    next.textContent = ack.retraining_started ? 'Check for the new round' : 'Next instance';
    next.addEventListener('click', () => {
      void this.refreshAnnotate();
    });
    row.appendChild(next);
    pane.appendChild(row);
    if (ack.retraining_started) {
      this.schedulePoll();
    }
  }

  private renderWaiting(message: string): void {
    this.feedback = null;
    const pane = this.panes.annotate;
    const box = document.createElement('div');
    box.className = 'waiting';
    const note = document.createElement('div');
    note.textContent = message;
    const check = document.createElement('button');
    check.className = 'check-btn';
    check.textContent = 'Check again';
    check.addEventListener('click', () => {
      void this.refreshAnnotate();
    });
    box.append(note, check);
    pane.appendChild(box);
    this.schedulePoll();
  }

  private renderAnnotateError(err: unknown): void {
    const pane = this.panes.annotate;
    pane.textContent = '';
    pane.appendChild(errorLine(err));
    const retry = document.createElement('button');
    retry.className = 'check-btn';
    retry.textContent = 'Retry';
    retry.addEventListener('click', () => {
      void this.refreshAnnotate();
    });
    pane.appendChild(retry);
  }

  private schedulePoll(): void {
    const delay = this.options.pollMs ?? 4000;
    if (delay <= 0) {
      return;
    }
    this.clearPoll();
    this.pollTimer = setTimeout(() => {
      void this.refreshAnnotate();
    }, delay);
  }

  private clearPoll(): void {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
  }
}

function errorLine(err: unknown): HTMLElement {
  const line = document.createElement('div');
  line.className = 'api-error';
  line.textContent =
    err instanceof ApiError ? `${err.code}: ${err.message}` : `request failed: ${String(err)}`;
  return line;
}
