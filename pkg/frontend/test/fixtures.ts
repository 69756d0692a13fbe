/**
 * Shared payload fixtures shaped exactly like the annotation service
 * responses, plus a small in-memory stand-in for the server so the
 * end-to-end test can drive a full round trip through fetch.
 */

import type {
  FeedbackRequest,
  InspectionPayload,
  MetricsPayload,
  NextSampleResponse,
  OverviewPayload,
  RoundPayload,
  SamplePayload,
} from '../src/api.js';

export function sampleFixture(overrides: Partial<SamplePayload> = {}): SamplePayload {
  const base: SamplePayload = {
    status: 'ok',
    round_index: 0,
    theta_version: 1,
    lease_expires_at: 1000600.0,
    instance: {
      id: 'pool-000007',
      subtokens: ['Gabe', 'von', 'Asp', '##irin', 'Complex', 'abgesetzt'],
      word_index: [0, 1, 2, 2, 3, 4],
      is_word_initial: [true, true, true, false, true, true],
      words: ['Gabe', 'von', 'Aspirin', 'Complex', 'abgesetzt'],
    },
    suggested_word_tags: ['O', 'O', 'B-Drug', 'I-Drug', 'O'],
    suggested_tags: ['O', 'O', 'B-Drug', 'X', 'I-Drug', 'O'],
    tag_set: ['O', 'B-Drug', 'I-Drug', 'B-Dose', 'I-Dose', 'X'],
    decode_tags: ['O', 'B-Drug', 'I-Drug', 'B-Dose', 'I-Dose'],
    token_marginals: [
      [0.9, 0.025, 0.025, 0.025, 0.025, 0.0],
      [0.88, 0.03, 0.03, 0.03, 0.03, 0.0],
      [0.05, 0.8, 0.05, 0.05, 0.05, 0.0],
      [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
      [0.2, 0.1, 0.45, 0.05, 0.2, 0.0],
      [0.85, 0.05, 0.04, 0.03, 0.03, 0.0],
    ],
    // per subtoken; the Aspirin word score repeats on its ##irin piece
    saliency: [0.01, -0.02, 0.3, 0.3, 0.12, 0.0],
    saliency_target: 4,
    query_score: {
      strategy: 'ltp',
      score: 0.55,
      evidence: { argmin_position: 4, argmin_word: 3, min_marginal: 0.45 },
    },
  };
  return { ...base, ...overrides };
}

export function metricsFixture(scale: number): MetricsPayload {
  // awkward decimals on purpose so exact-equality checks mean something
  return {
    precision: 0.625 * scale,
    recall: 0.5555555555555556 * scale,
    f1: 0.5882352941176471 * scale,
    true_positives: 5,
    false_positives: 3,
    false_negatives: 4,
  };
}

export function roundFixture(index: number): RoundPayload {
  const humanTokens = 60 + 60 * index;
  const modelTokens = 540 - 60 * index;
  // estimated share, so a float, not a count
  const modelCorrect = 0.9076 * modelTokens;
  return {
    round_index: index,
    labeled_count: 10 + 10 * index,
    theta_version: index + 2,
    queried_ids: [`pool-${String(7 + 5 * index).padStart(6, '0')}`],
    exclusive: metricsFixture(1.0),
    inclusive: {
      accuracy: (humanTokens + modelCorrect) / (humanTokens + modelTokens),
      human_tokens: humanTokens,
      model_tokens: modelTokens,
      model_correct: modelCorrect,
      estimated: true,
    },
    workload: {
      per_instance: { [`pool-${String(7 + 5 * index).padStart(6, '0')}`]: 2 },
      round_corrections: 2,
      cumulative_corrections: 2 * (index + 1),
    },
    stop_reason: null,
  };
}

export function inspectionFixture(nRounds: number): InspectionPayload {
  return {
    metric_mode: 'exclusive',
    rounds: Array.from({ length: nRounds }, (_, i) => roundFixture(i)),
  };
}

export function overviewFixture(overrides: Partial<OverviewPayload> = {}): OverviewPayload {
  const base: OverviewPayload = {
    project_id: 'demo',
    rounds_completed: 1,
    rounds_budget: 8,
    batch_size: 10,
    instances_annotated: 10,
    pool_remaining: 97,
    estimated_remaining_instances: 70,
    stopping: { rule: 'budget', status: 'continue', reason: null },
    current_round: { open: true, round_index: 1, submitted: 3, batch: 10, retraining: false },
    per_annotator_workload: {
      'ann-a': { instances: 13, corrections: 5, seconds: 171.5 },
    },
  };
  return { ...base, ...overrides };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

/**
 * Scripted stand-in for the annotation server. One instance per round,
 * batch size one, so a single submit completes the round; retraining
 * stays on until finishRetrain() is called, mirroring the window in
 * which the real service reports {"status": "retraining"}.
 */
export class FakeServer {
  token = 'token-a';
  log: string[] = [];
  submissions: FeedbackRequest[] = [];
  inspection: InspectionPayload = { metric_mode: 'exclusive', rounds: [] };
  overview: OverviewPayload = overviewFixture({
    rounds_completed: 0,
    instances_annotated: 0,
    current_round: { open: true, round_index: 0, submitted: 0, batch: 1, retraining: false },
    per_annotator_workload: {},
  });

  private retraining = false;
  private round = 0;
  private samples: SamplePayload[] = [
    sampleFixture(),
    sampleFixture({
      round_index: 1,
      theta_version: 2,
      instance: {
        id: 'pool-000012',
        subtokens: ['Therapie', 'mit', 'Ibu', '##profen', 'fortgesetzt'],
        word_index: [0, 1, 2, 2, 3],
        is_word_initial: [true, true, true, false, true],
        words: ['Therapie', 'mit', 'Ibuprofen', 'fortgesetzt'],
      },
      suggested_word_tags: ['O', 'O', 'B-Drug', 'O'],
      suggested_tags: ['O', 'O', 'B-Drug', 'X', 'O'],
      token_marginals: [
        [0.9, 0.025, 0.025, 0.025, 0.025, 0.0],
        [0.88, 0.03, 0.03, 0.03, 0.03, 0.0],
        [0.1, 0.6, 0.1, 0.1, 0.1, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        [0.85, 0.05, 0.04, 0.03, 0.03, 0.0],
      ],
      saliency: [0.02, 0.0, 0.4, 0.4, 0.05],
      saliency_target: 2,
      query_score: {
        strategy: 'ltp',
        score: 0.4,
        evidence: { argmin_position: 2, argmin_word: 2, min_marginal: 0.6 },
      },
    }),
  ];

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input);
    const method = (init?.method ?? 'GET').toUpperCase();
    this.log.push(`${method} ${url.pathname}`);

    if (url.pathname === '/api/health') {
      return json({ status: 'ok', project_id: 'demo' });
    }
    const headers = (init?.headers ?? {}) as Record<string, string>;
    if (headers['X-Annotator-Token'] !== this.token) {
      return json({ error: 'unknown_annotator', message: 'unknown annotator token' }, 401);
    }

    if (url.pathname === '/api/next-sample') {
      return json(this.nextSample());
    }
    if (url.pathname === '/api/submit-feedback') {
      return this.submitFeedback(JSON.parse(String(init?.body)) as FeedbackRequest);
    }
    if (url.pathname === '/api/model-inspection') {
      return json(this.inspection);
    }
    if (url.pathname === '/api/metric-mode') {
      const body = JSON.parse(String(init?.body)) as { metric_mode: string };
      if (body.metric_mode !== 'exclusive' && body.metric_mode !== 'inclusive') {
        return json({ error: 'bad_mode', message: 'metric mode must be exclusive or inclusive' }, 422);
      }
      this.inspection.metric_mode = body.metric_mode;
      return json({ metric_mode: body.metric_mode });
    }
    if (url.pathname === '/api/task-overview') {
      return json(this.overview);
    }
    if (url.pathname === '/api/save') {
      return json({ status: 'saved' });
    }
    if (url.pathname === '/api/export-annotations') {
      return json({ annotations: [] });
    }
    return json({ error: 'not_found', message: `no route ${url.pathname}` }, 404);
  };

  finishRetrain(): void {
    this.retraining = false;
    this.round += 1;
    this.overview = overviewFixture({
      rounds_completed: this.round,
      instances_annotated: this.round,
      current_round: { open: true, round_index: this.round, submitted: 0, batch: 1, retraining: false },
    });
  }

  private nextSample(): NextSampleResponse {
    if (this.retraining) {
      return { status: 'retraining' };
    }
    if (this.round >= this.samples.length) {
      return { status: 'stopped', reason: 'rounds budget exhausted' };
    }
    return this.samples[this.round];
  }

  private submitFeedback(request: FeedbackRequest): Response {
    const sample = this.samples[this.round];
    if (this.retraining) {
      return json({ error: 'retraining', message: 'retraining in progress' }, 409);
    }
    if (request.instance_id !== sample.instance.id) {
      return json({ error: 'not_queried', message: `instance ${request.instance_id} was not queried` }, 422);
    }
    if (request.final_tags.length !== sample.instance.words.length) {
      return json(
        { error: 'bad_length', message: `expected ${sample.instance.words.length} word tags` },
        422,
      );
    }
    this.submissions.push(request);
    let workload = 0;
    for (let i = 0; i < request.final_tags.length; i++) {
      if (request.final_tags[i] !== sample.suggested_word_tags[i]) {
        workload += 1;
      }
    }
    this.retraining = true;
    this.inspection = {
      metric_mode: this.inspection.metric_mode,
      rounds: [...this.inspection.rounds, roundFixture(this.round)],
    };
    return json({
      status: 'accepted',
      instance_id: request.instance_id,
      workload,
      stale: request.suggestion_theta_version !== sample.theta_version,
      secondary: false,
      retraining_started: true,
    });
  }
}
