/**
 * Word-level BIO bookkeeping for the editing surface.
 *
 * The working annotation is a flat array of word tags, but annotators
 * manipulate entities: a drop-down edit is applied through
 * applyWordTag, which restores B/I consistency around the edited word,
 * so the client only ever submits consistent runs.
 */

export const OUTSIDE = 'O';

export interface EntitySpan {
  start: number; // first word index
  end: number; // last word index, inclusive
  type: string;
}

export interface Span {
  start: number;
  end: number;
}

export function isBegin(tag: string): boolean {
  return tag.startsWith('B-');
}

export function isInside(tag: string): boolean {
  return tag.startsWith('I-');
}

export function entityType(tag: string): string {
  return isBegin(tag) || isInside(tag) ? tag.slice(2) : '';
}

/** Maximal B/I runs; an orphan I- shows up as its own span rather than vanishing. */
export function spansFromTags(tags: string[]): EntitySpan[] {
  const spans: EntitySpan[] = [];
  let open: EntitySpan | null = null;
  for (let i = 0; i < tags.length; i++) {
    const tag = tags[i];
    if (isBegin(tag)) {
      open = { start: i, end: i, type: entityType(tag) };
      spans.push(open);
    } else if (isInside(tag) && open !== null && open.end === i - 1 && open.type === entityType(tag)) {
      open.end = i;
    } else if (isInside(tag)) {
      open = { start: i, end: i, type: entityType(tag) };
      spans.push(open);
    } else {
      open = null;
    }
  }
  return spans;
}

/**
 * Apply one drop-down choice at word `at` and repair BIO consistency
 * around it:
 *
 * - retyping an entity head retypes the continuation that follows it
 *   (B-Drug over I-Drug ... becomes B-Diagnosis over I-Diagnosis ...);
 * - clearing a head to O promotes the orphaned continuation to a fresh
 *   entity of its own type;
 * - an I- whose predecessor does not match in type becomes a B-.
 */
export function applyWordTag(tags: string[], at: number, chosen: string): string[] {
  const out = tags.slice();
  if (chosen === OUTSIDE) {
    out[at] = OUTSIDE;
    if (at + 1 < out.length && isInside(out[at + 1])) {
      out[at + 1] = `B-${entityType(out[at + 1])}`;
    }
    return out;
  }
  const etype = entityType(chosen);
  if (isInside(chosen)) {
    const prev = at > 0 ? out[at - 1] : OUTSIDE;
    out[at] = prev !== OUTSIDE && entityType(prev) === etype ? `I-${etype}` : `B-${etype}`;
  } else {
    out[at] = `B-${etype}`;
  }
  for (let i = at + 1; i < out.length && isInside(out[i]); i++) {
    out[i] = `I-${etype}`;
  }
  return out;
}

/** Reject a suggested entity: its words go back to O. */
export function clearSpan(tags: string[], span: EntitySpan): string[] {
  const out = tags.slice();
  for (let i = span.start; i <= span.end; i++) {
    out[i] = OUTSIDE;
  }
  // spans are maximal, so the next word is only I- if the input was
  // already inconsistent; promote it rather than leave an orphan
  const next = span.end + 1;
  if (next < out.length && isInside(out[next])) {
    out[next] = `B-${entityType(out[next])}`;
  }
  return out;
}

export function countEdits(suggested: string[], final: string[]): number {
  let n = 0;
  for (let i = 0; i < final.length; i++) {
    if (suggested[i] !== final[i]) {
      n += 1;
    }
  }
  return n;
}

export function spansOverlap(a: Span, b: Span): boolean {
  return a.start <= b.end && b.start <= a.end;
}

export function overlapsAny(spans: Span[], candidate: Span): boolean {
  return spans.some((s) => spansOverlap(s, candidate));
}
