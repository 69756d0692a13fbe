/**
 * Model inspection: the learning curve so far, one point per completed
 * round, with a toggle between exclusive (held-out precision/recall/F1)
 * and inclusive (accuracy of the jointly annotated corpus) evaluation.
 * The two series carry different fields, so the table reshapes with the
 * toggle. Toggling redraws from the payload already in hand; nothing is
 * refetched and nothing is smoothed, every cell is the server's number
 * verbatim.
 */

import type { InspectionPayload, RoundPayload } from './api.js';

const WIDTH = 640;
const HEIGHT = 220;
const PAD = 28;

const EXCLUSIVE_COLUMNS: [string, string][] = [
  ['round_index', 'round'],
  ['labeled_count', 'labeled'],
  ['precision', 'precision'],
  ['recall', 'recall'],
  ['f1', 'f1'],
  ['true_positives', 'TP'],
  ['false_positives', 'FP'],
  ['false_negatives', 'FN'],
  ['round_corrections', 'corrections'],
  ['stop_reason', 'stop'],
];

const INCLUSIVE_COLUMNS: [string, string][] = [
  ['round_index', 'round'],
  ['labeled_count', 'labeled'],
  ['accuracy', 'accuracy'],
  ['human_tokens', 'human tokens'],
  ['model_tokens', 'model tokens'],
  ['model_correct', 'model correct'],
  ['estimated', 'estimated'],
  ['round_corrections', 'corrections'],
  ['stop_reason', 'stop'],
];

export class InspectionView {
  readonly element: HTMLElement;
  mode = 'exclusive';

  private payload: InspectionPayload | null = null;
  private onModeChange?: (mode: string) => void;

  constructor(onModeChange?: (mode: string) => void) {
    this.onModeChange = onModeChange;
    this.element = document.createElement('section');
    this.element.className = 'inspection';
    this.render();
  }

  setPayload(payload: InspectionPayload): void {
    this.payload = payload;
    this.mode = payload.metric_mode;
    this.render();
  }

  setMode(mode: string): void {
    if (mode === this.mode) {
      return;
    }
    this.mode = mode;
    this.render();
    this.onModeChange?.(mode);
  }

  /** The curve's y value: held-out F1 or joint-annotation accuracy. */
  private headlineOf(round: RoundPayload): number {
    return this.mode === 'inclusive' ? round.inclusive.accuracy : round.exclusive.f1;
  }

  private fieldOf(round: RoundPayload, field: string): unknown {
    switch (field) {
      case 'round_index':
        return round.round_index;
      case 'labeled_count':
        return round.labeled_count;
      case 'round_corrections':
        return round.workload.round_corrections;
      case 'stop_reason':
        return round.stop_reason ?? '';
      default: {
        const series = this.mode === 'inclusive' ? round.inclusive : round.exclusive;
        return (series as unknown as Record<string, unknown>)[field];
      }
    }
  }

  private render(): void {
    this.element.textContent = '';

    const toggle = document.createElement('div');
    toggle.className = 'mode-toggle';
    for (const mode of ['exclusive', 'inclusive']) {
      const button = document.createElement('button');
      button.className = mode === this.mode ? 'mode-btn active' : 'mode-btn';
      button.dataset.mode = mode;
      button.textContent = mode;
      button.addEventListener('click', () => this.setMode(mode));
      toggle.appendChild(button);
    }
    this.element.appendChild(toggle);

    if (this.payload === null || this.payload.rounds.length === 0) {
      const empty = document.createElement('div');
      empty.className = 'empty-state';
      empty.textContent = 'No completed rounds yet. Finish the current batch to train the first model.';
      this.element.appendChild(empty);
      return;
    }

    this.element.appendChild(this.renderChart(this.payload.rounds));
    this.element.appendChild(this.renderTable(this.payload.rounds));
  }

  private renderChart(rounds: RoundPayload[]): HTMLElement {
    const box = document.createElement('div');
    box.className = 'chart-box';
    const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.setAttribute('viewBox', `0 0 ${WIDTH} ${HEIGHT}`);
    svg.setAttribute('class', 'curve');

    const x = (i: number) =>
      rounds.length === 1 ? WIDTH / 2 : PAD + (i * (WIDTH - 2 * PAD)) / (rounds.length - 1);
    const y = (value: number) => HEIGHT - PAD - value * (HEIGHT - 2 * PAD);

    for (const grid of [0, 0.5, 1]) {
      const line = document.createElementNS('http://www.w3.org/2000/svg', 'line');
      line.setAttribute('x1', String(PAD));
      line.setAttribute('x2', String(WIDTH - PAD));
      line.setAttribute('y1', String(y(grid)));
      line.setAttribute('y2', String(y(grid)));
      line.setAttribute('class', 'gridline');
      svg.appendChild(line);
      const label = document.createElementNS('http://www.w3.org/2000/svg', 'text');
      label.setAttribute('x', '2');
      label.setAttribute('y', String(y(grid) + 4));
      label.setAttribute('class', 'gridlabel');
      label.textContent = grid.toFixed(1);
      svg.appendChild(label);
    }

    const line = document.createElementNS('http://www.w3.org/2000/svg', 'polyline');
    line.setAttribute(
      'points',
      rounds.map((r, i) => `${x(i)},${y(this.headlineOf(r))}`).join(' '),
    );
    line.setAttribute('class', 'curve-line');
    svg.appendChild(line);

    rounds.forEach((r, i) => {
      const dot = document.createElementNS('http://www.w3.org/2000/svg', 'circle');
      dot.setAttribute('cx', String(x(i)));
      dot.setAttribute('cy', String(y(this.headlineOf(r))));
      dot.setAttribute('r', '4');
      dot.setAttribute('class', 'curve-dot');
      dot.dataset.round = String(r.round_index);
      dot.dataset.value = String(this.headlineOf(r));
      svg.appendChild(dot);
    });

    box.appendChild(svg);
    const caption = document.createElement('div');
    caption.className = 'chart-caption';
    caption.textContent =
      this.mode === 'inclusive' ? 'inclusive accuracy by round' : 'exclusive F1 by round';
    box.appendChild(caption);
    return box;
  }

  private renderTable(rounds: RoundPayload[]): HTMLElement {
    const columns = this.mode === 'inclusive' ? INCLUSIVE_COLUMNS : EXCLUSIVE_COLUMNS;
    const table = document.createElement('table');
    table.className = 'round-table';
    const head = document.createElement('tr');
    for (const [, label] of columns) {
      const th = document.createElement('th');
      th.textContent = label;
      head.appendChild(th);
    }
    table.appendChild(head);

    for (const round of rounds) {
      const row = document.createElement('tr');
      row.dataset.round = String(round.round_index);
      for (const [field] of columns) {
        const td = document.createElement('td');
        td.dataset.field = field;
        td.textContent = String(this.fieldOf(round, field));
        row.appendChild(td);
      }
      table.appendChild(row);
    }
    return table;
  }
}
