/**
 * Sample review: show the queried sentence as the model sees it.
 *
 * Each word is one chip; continuation subtokens stay fused into their
 * word and never get their own tag control. Chip background encodes
 * occlusion saliency, normalized to [0, 1] for display only; the exact
 * saliency value and the full marginal row from the payload appear in
 * the detail panel on hover. The word the query strategy singled out
 * (the least-confident token for ltp) is outlined.
 */

import type { SamplePayload } from './api.js';

export interface ReviewToken {
  wordIndex: number;
  word: string;
  pieces: string[];
  suggested: string;
  /** Marginal mass of the suggested tag at this word. */
  confidence: number;
  /** Raw payload saliency. */
  saliency: number;
  /** Display-normalized saliency in [0, 1]. */
  heat: number;
  /** Marginal row over tag_set for the word-initial subtoken. */
  marginals: number[];
  isTarget: boolean;
}

/** Min-max normalize for display; a uniform input renders uniformly. */
export function normalizeSaliency(values: number[]): number[] {
  if (values.length === 0) {
    return [];
  }
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  if (hi - lo <= 0) {
    return values.map(() => 0.5);
  }
  return values.map((v) => (v - lo) / (hi - lo));
}

export function reviewTokens(sample: SamplePayload): ReviewToken[] {
  const inst = sample.instance;
  const targetWord = inst.word_index[sample.saliency_target];
  const pieces: string[][] = inst.words.map(() => []);
  const firstPosition: number[] = inst.words.map(() => -1);
  for (let i = 0; i < inst.subtokens.length; i++) {
    const w = inst.word_index[i];
    if (firstPosition[w] < 0) {
      firstPosition[w] = i;
    }
    pieces[w].push(inst.subtokens[i]);
  }
  // the saliency row repeats a word's score across its subtokens;
  // read it once per word at the word-initial position
  const wordSaliency = firstPosition.map((pos) => sample.saliency[pos]);
  const heats = normalizeSaliency(wordSaliency);
  const tokens: ReviewToken[] = [];
  for (let w = 0; w < inst.words.length; w++) {
    const marginals = sample.token_marginals[firstPosition[w]];
    const suggested = sample.suggested_word_tags[w];
    const column = sample.tag_set.indexOf(suggested);
    tokens.push({
      wordIndex: w,
      word: inst.words[w],
      pieces: pieces[w],
      suggested,
      confidence: column >= 0 ? marginals[column] : 0,
      saliency: wordSaliency[w],
      heat: heats[w],
      marginals,
      isTarget: w === targetWord,
    });
  }
  return tokens;
}

function heatColor(heat: number): string {
  return `rgba(235, 140, 20, ${(0.08 + 0.6 * heat).toFixed(3)})`;
}

function evidenceText(value: unknown): string {
  if (value !== null && typeof value === 'object') {
    return JSON.stringify(value);
  }
  return String(value);
}

export function renderReview(sample: SamplePayload): HTMLElement {
  const root = document.createElement('section');
  root.className = 'review';

  const head = document.createElement('div');
  head.className = 'review-head';
  head.textContent =
    `Instance ${sample.instance.id}  ·  round ${sample.round_index}  ·  model v${sample.theta_version}`;
  root.appendChild(head);

  const strip = document.createElement('div');
  strip.className = 'review-strip';
  root.appendChild(strip);

  const detail = document.createElement('div');
  detail.className = 'marginal-panel';
  detail.textContent = 'Hover a word for its exact tag marginals.';

  for (const token of reviewTokens(sample)) {
    const chip = document.createElement('span');
    chip.className = token.isTarget ? 'review-token target' : 'review-token';
    chip.dataset.word = String(token.wordIndex);
    chip.dataset.heat = String(token.heat);
    chip.style.backgroundColor = heatColor(token.heat);

    const text = document.createElement('span');
    text.className = 'review-word';
    // fused rendering: the pieces stay one unit, just visibly segmented
    text.textContent = token.pieces.length > 1 ? token.pieces.join('·') : token.word;
    chip.appendChild(text);

    const badge = document.createElement('span');
    badge.className = token.suggested === 'O' ? 'tag-badge outside' : 'tag-badge';
    badge.textContent = token.suggested;
    chip.appendChild(badge);

    const conf = document.createElement('span');
    conf.className = 'confidence';
    conf.textContent = `${(100 * token.confidence).toFixed(1)}%`;
    conf.title = String(token.confidence);
    chip.appendChild(conf);

    chip.addEventListener('mouseenter', () => {
      fillDetail(detail, sample, token);
    });
    strip.appendChild(chip);
  }

  const legend = document.createElement('div');
  legend.className = 'saliency-legend';
  const low = document.createElement('span');
  low.textContent = 'low influence';
  const bar = document.createElement('span');
  bar.className = 'legend-bar';
  const high = document.createElement('span');
  high.textContent = 'high influence';
  legend.append(low, bar, high);
  root.appendChild(legend);

  root.appendChild(detail);

  const evidence = document.createElement('div');
  evidence.className = 'evidence';
  const title = document.createElement('div');
  title.className = 'evidence-title';
  title.textContent = `Queried by ${sample.query_score.strategy}, score ${String(sample.query_score.score)}`;
  evidence.appendChild(title);
  const list = document.createElement('dl');
  for (const [key, value] of Object.entries(sample.query_score.evidence)) {
    const dt = document.createElement('dt');
    dt.textContent = key;
    const dd = document.createElement('dd');
    dd.textContent = evidenceText(value);
    list.append(dt, dd);
  }
  evidence.appendChild(list);
  root.appendChild(evidence);

  return root;
}

function fillDetail(panel: HTMLElement, sample: SamplePayload, token: ReviewToken): void {
  panel.textContent = '';
  const head = document.createElement('div');
  head.className = 'marginal-head';
  head.textContent = `'${token.word}'  ·  saliency ${String(token.saliency)}`;
  panel.appendChild(head);

  const table = document.createElement('table');
  table.className = 'marginal-table';
  for (let k = 0; k < sample.tag_set.length; k++) {
    const row = document.createElement('tr');
    const name = document.createElement('td');
    name.textContent = sample.tag_set[k];
    const mass = document.createElement('td');
    mass.className = 'marginal-mass';
    // exact payload value; rounding happens nowhere on this path
    mass.textContent = String(token.marginals[k]);
    if (sample.tag_set[k] === token.suggested) {
      row.className = 'suggested-row';
    }
    row.append(name, mass);
    table.appendChild(row);
  }
  panel.appendChild(table);
}
