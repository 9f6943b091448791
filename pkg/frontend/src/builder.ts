/** Row-based advanced-query builder.
 *
 * The serializer mirrors the server grammar: every string it emits parses,
 * no matter what the rows contain. Unsafe term values are quoted, double
 * quotes are stripped (the grammar has no escape), and rows that cannot be
 * expressed (unknown field, empty value, range on a non-date field) are
 * dropped rather than emitted broken.
 */

export type RowOp = "is" | "phrase" | "exists" | "not-exists" | "range";
export type Join = "AND" | "OR";

export interface BuilderRow {
  field: string;
  op: RowOp;
  value: string;
  lo?: string;
  hi?: string;
  negate?: boolean;
}

export interface BuilderGroup {
  join: Join;
  rows: BuilderRow[];
}

export interface BuilderState {
  join: Join;
  groups: BuilderGroup[];
}

export interface FieldInfo {
  /** dotted path -> value type ("text" | "date"), as served by /v1/fields */
  fields: Record<string, string>;
}

const WORD_UNSAFE = /[\s()[\]":]/;
const OPERATOR_WORDS = new Set(["AND", "OR", "NOT", "*"]);
const DATE_SHAPE = /^\d{4}-\d{2}-\d{2}$/;

export function emptyBuilder(): BuilderState {
  return { join: "AND", groups: [{ join: "AND", rows: [] }] };
}

function cleanValue(raw: string): string {
  // the grammar cannot escape quotes inside phrases, so they are dropped
  return raw.replace(/"/g, "").trim();
}

function serializeRow(row: BuilderRow, info: FieldInfo): string | null {
  const fieldType = info.fields[row.field];
  if (!fieldType) {
    return null;
  }
  let atom: string | null = null;
  if (row.op === "exists" || row.op === "not-exists") {
    atom = `_exists_:${row.field}`;
    if (row.op === "not-exists") {
      atom = `(NOT ${atom})`;
    }
  } else if (row.op === "range") {
    if (fieldType !== "date") {
      return null;
    }
    const lo = DATE_SHAPE.test(row.lo ?? "") ? row.lo : "*";
    const hi = DATE_SHAPE.test(row.hi ?? "") ? row.hi : "*";
    atom = `${row.field}:[${lo} TO ${hi}]`;
  } else {
    const value = cleanValue(row.value);
    if (!value) {
      return null;
    }
    const mustQuote = row.op === "phrase" || WORD_UNSAFE.test(value) || OPERATOR_WORDS.has(value);
    atom = mustQuote ? `${row.field}:"${value}"` : `${row.field}:${value}`;
  }
  return row.negate && row.op !== "not-exists" ? `(NOT ${atom})` : atom;
}

function serializeGroup(group: BuilderGroup, info: FieldInfo): string | null {
  const parts = group.rows
    .map((row) => serializeRow(row, info))
    .filter((part): part is string => part !== null);
  if (!parts.length) {
    return null;
  }
  if (parts.length === 1) {
    return parts[0]; // an atom or an already-parenthesized NOT
  }
  return `(${parts.join(` ${group.join} `)})`;
}

/** Empty string means "nothing to submit" (the submit button disables). */
export function serializeBuilder(state: BuilderState, info: FieldInfo): string {
  const groups = state.groups
    .map((group) => serializeGroup(group, info))
    .filter((part): part is string => part !== null);
  if (!groups.length) {
    return "";
  }
  if (groups.length === 1) {
    return groups[0];
  }
  return `(${groups.join(` ${state.join} `)})`;
}
