/** Annotations derived from spatial-relation answers.
 *
 * Measurement relations become a line between the two resolved object
 * centroids labeled with the service-reported value, verbatim; the viewer
 * never recomputes the distance from the geometry it happens to have
 * loaded, since its copy of the map is subsampled. Boolean relations
 * become a yes/no badge with both objects highlighted.
 */

import type { RelationPayload, Vec3 } from "./types.js";

const MEASUREMENT_RELATIONS: ReadonlySet<string> = new Set(["howFar"]);

export interface MeasureAnnotation {
  readonly kind: "measure";
  readonly relation: string;
  readonly a: Vec3;
  readonly b: Vec3;
  /** Exact value from the service reply, in meters. */
  readonly value: number;
  readonly label: string;
}

export interface BoolAnnotation {
  readonly kind: "bool";
  readonly relation: string;
  readonly operands: readonly [string, string];
  readonly value: boolean;
  readonly label: string;
}

export type Annotation = MeasureAnnotation | BoolAnnotation;

/** Render a measurement value for the line label. Keeps full precision in
 * `value`; the label trims for display only. */
export function formatMeters(value: number): string {
  return `${value.toFixed(3)} m`;
}

/** Build the screen annotation for a relation reply. */
export function annotate(relation: RelationPayload): Annotation {
  if (MEASUREMENT_RELATIONS.has(relation.relation)) {
    const [first, second] = relation.objects;
    return {
      kind: "measure",
      relation: relation.relation,
      a: first!.centroid,
      b: second!.centroid,
      value: relation.value,
      label: `${relation.operands[0]} to ${relation.operands[1]}: ${formatMeters(relation.value)}`,
    };
  }
  const truth = relation.value !== 0;
  return {
    kind: "bool",
    relation: relation.relation,
    operands: relation.operands,
    value: truth,
    label: `${relation.relation}(${relation.operands[0]}, ${relation.operands[1]}) = ${truth}`,
  };
}
