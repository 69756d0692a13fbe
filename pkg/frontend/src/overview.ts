/** Task overview: progress, stopping status, workload, agreement. */

import type { OverviewPayload } from './api.js';

function field(label: string, name: string, value: unknown): HTMLElement {
  const row = document.createElement('div');
  row.className = 'fact';
  const key = document.createElement('span');
  key.className = 'fact-label';
  key.textContent = label;
  const val = document.createElement('span');
  val.className = 'fact-value';
  val.dataset.field = name;
  // numbers straight from the payload; the client does no budget arithmetic
  val.textContent = String(value);
  row.append(key, val);
  return row;
}

export function renderOverview(payload: OverviewPayload): HTMLElement {
  const root = document.createElement('section');
  root.className = 'overview';

  const head = document.createElement('h2');
  head.textContent = `Project ${payload.project_id}`;
  root.appendChild(head);

  if (payload.stopping.status === 'stop_recommended') {
    const banner = document.createElement('div');
    banner.className = 'stop-banner';
    banner.textContent =
      `Stopping rule '${payload.stopping.rule}' recommends stopping now: ${payload.stopping.reason ?? ''}`;
    root.appendChild(banner);
  } else {
    const note = document.createElement('div');
    note.className = 'stop-note';
    note.textContent = `Stopping rule '${payload.stopping.rule}': keep annotating.`;
    root.appendChild(note);
  }

  const progress = document.createElement('div');
  progress.className = 'progress-panel';
  progress.appendChild(field('rounds completed', 'rounds_completed', payload.rounds_completed));
  progress.appendChild(field('rounds budget', 'rounds_budget', payload.rounds_budget));
  progress.appendChild(field('batch size', 'batch_size', payload.batch_size));
  progress.appendChild(field('instances annotated', 'instances_annotated', payload.instances_annotated));
  progress.appendChild(field('pool remaining', 'pool_remaining', payload.pool_remaining));
  progress.appendChild(
    field('still to annotate (estimate)', 'estimated_remaining_instances', payload.estimated_remaining_instances),
  );

  const bar = document.createElement('div');
  bar.className = 'budget-bar';
  const fill = document.createElement('div');
  fill.className = 'budget-fill';
  const ratio = payload.rounds_budget > 0 ? payload.rounds_completed / payload.rounds_budget : 0;
  fill.style.width = `${Math.min(100, 100 * ratio).toFixed(1)}%`;
  bar.appendChild(fill);
  progress.appendChild(bar);
  root.appendChild(progress);

  const current = document.createElement('div');
  current.className = 'current-round';
  const cr = payload.current_round;
  if (cr.retraining) {
    current.textContent = `Round ${cr.round_index}: retraining in progress.`;
  } else if (cr.open) {
    current.textContent = `Round ${cr.round_index} open: ${cr.submitted} of ${cr.batch} instances submitted.`;
  } else {
    current.textContent = `No round open (last completed index ${cr.round_index - 1}).`;
  }
  root.appendChild(current);

  const workload = document.createElement('div');
  workload.className = 'workload-panel';
  const wtitle = document.createElement('h3');
  wtitle.textContent = 'Workload by annotator';
  workload.appendChild(wtitle);
  const names = Object.keys(payload.per_annotator_workload).sort();
  if (names.length === 0) {
    const none = document.createElement('div');
    none.className = 'workload-none';
    none.textContent = 'nothing submitted yet';
    workload.appendChild(none);
  } else {
    const table = document.createElement('table');
    table.className = 'workload-table';
    const head = document.createElement('tr');
    for (const h of ['annotator', 'instances', 'corrections', 'seconds']) {
      const th = document.createElement('th');
      th.textContent = h;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const name of names) {
      const stats = payload.per_annotator_workload[name];
      const row = document.createElement('tr');
      row.dataset.annotator = name;
      for (const value of [name, stats.instances, stats.corrections, stats.seconds]) {
        const td = document.createElement('td');
        td.textContent = String(value);
        row.appendChild(td);
      }
      table.appendChild(row);
    }
    workload.appendChild(table);
  }
  root.appendChild(workload);

  // consistency is only in the payload once a second annotator shows up
  if (payload.consistency !== undefined) {
    const panel = document.createElement('div');
    panel.className = 'consistency-panel';
    const title = document.createElement('h3');
    title.textContent = 'Agreement between annotators';
    panel.appendChild(title);
    const table = document.createElement('table');
    table.className = 'consistency-table';
    const head = document.createElement('tr');
    for (const h of ['pair', 'shared instances', 'raw agreement', 'kappa']) {
      const th = document.createElement('th');
      th.textContent = h;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const report of payload.consistency) {
      const row = document.createElement('tr');
      const cells = [
        `${report.annotator_a} / ${report.annotator_b}`,
        String(report.overlap_instances),
        String(report.raw_agreement),
        String(report.kappa),
      ];
      for (const text of cells) {
        const td = document.createElement('td');
        td.textContent = text;
        row.appendChild(td);
      }
      table.appendChild(row);
    }
    panel.appendChild(table);
    root.appendChild(panel);
  }

  return root;
}
