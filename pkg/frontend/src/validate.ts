// Client-side form constraints derived from the paradigm descriptor.
// These checks are UX only; the gateway re-validates everything.

import type { DatastreamSpec, DescriptorDoc, TrainingParamsDoc } from "./api.js";

export function parseLayerSizes(text: string): number[] | null {
	const parts = text
		.split(",")
		.map((part) => part.trim())
		.filter((part) => part.length > 0);
	if (parts.length === 0) return null;
	const sizes: number[] = [];
	for (const part of parts) {
		if (!/^\d+$/.test(part)) return null;
		sizes.push(Number(part));
	}
	return sizes;
}

export function validateLayerSizes(descriptor: DescriptorDoc, sizes: number[]): string[] {
	const problems: string[] = [];
	const topo = descriptor.topology;
	if (sizes.length < topo.min_layers || sizes.length > topo.max_layers) {
		const bound =
			topo.min_layers === topo.max_layers
				? `${topo.min_layers}`
				: `${topo.min_layers}-${topo.max_layers}`;
		problems.push(`this paradigm takes ${bound} layers, got ${sizes.length}`);
	}
	sizes.forEach((size, i) => {
		if (size < 1) problems.push(`layer ${i + 1} must have at least 1 unit`);
	});
	if (topo.layer_size_bounds && sizes.length === topo.layer_size_bounds.length) {
		topo.layer_size_bounds.forEach(([low, high], i) => {
			if (sizes[i] < low || sizes[i] > high) {
				problems.push(`layer ${i + 1} must be within [${low}, ${high}] units`);
			}
		});
	}
	const io = descriptor.io_schema;
	if (io.input_dim !== "variable" && sizes[0] !== io.input_dim) {
		problems.push(`input layer must have ${io.input_dim} units`);
	}
	if (io.output_dim !== "variable" && sizes[sizes.length - 1] !== io.output_dim) {
		problems.push(`output layer must have ${io.output_dim} units`);
	}
	return problems;
}

export function validateTrainingParams(params: TrainingParamsDoc): string[] {
	const problems: string[] = [];
	if (!(params.learning_rate > 0)) problems.push("learning rate must be > 0");
	if (!(params.momentum >= 0 && params.momentum < 1)) {
		problems.push("momentum must be in [0, 1)");
	}
	if (!Number.isInteger(params.max_epochs) || params.max_epochs < 0) {
		problems.push("max epochs must be a non-negative integer");
	}
	if (!(params.target_error >= 0)) problems.push("target error must be >= 0");
	if (!Number.isInteger(params.seed)) problems.push("seed must be an integer");
	return problems;
}

// Explicit patterns are typed one per line: inputs, "->", targets.
// Example:  0, 1 -> 1
export function parseExplicitPatterns(
	text: string,
): { inputs: number[][]; targets: number[][] } | { error: string } {
	const inputs: number[][] = [];
	const targets: number[][] = [];
	const lines = text
		.split("\n")
		.map((line) => line.trim())
		.filter((line) => line.length > 0);
	if (lines.length === 0) return { error: "no patterns given" };
	for (const [index, line] of lines.entries()) {
		const sides = line.split("->");
		if (sides.length !== 2) {
			return { error: `line ${index + 1}: expected "inputs -> targets"` };
		}
		const input = parseVector(sides[0]);
		const target = parseVector(sides[1]);
		if (input === null || target === null) {
			return { error: `line ${index + 1}: values must be numbers` };
		}
		if (inputs.length > 0 && input.length !== inputs[0].length) {
			return { error: `line ${index + 1}: expected ${inputs[0].length} input values` };
		}
		if (targets.length > 0 && target.length !== targets[0].length) {
			return { error: `line ${index + 1}: expected ${targets[0].length} target values` };
		}
		inputs.push(input);
		targets.push(target);
	}
	return { inputs, targets };
}

function parseVector(text: string): number[] | null {
	const parts = text
		.split(",")
		.map((part) => part.trim())
		.filter((part) => part.length > 0);
	if (parts.length === 0) return null;
	const values: number[] = [];
	for (const part of parts) {
		const value = Number(part);
		if (!Number.isFinite(value)) return null;
		values.push(value);
	}
	return values;
}

export interface QueryStreamForm {
	query: string;
	store: string;
	inputColumns: string;
	targetColumns: string;
}

export function buildQueryStream(form: QueryStreamForm): DatastreamSpec | { error: string } {
	if (!form.query.trim()) return { error: "query statement is empty" };
	if (!form.store.trim()) return { error: "store name or URL is empty" };
	const inputColumns = splitColumns(form.inputColumns);
	if (inputColumns.length === 0) return { error: "at least one input column is needed" };
	const targetColumns = splitColumns(form.targetColumns);
	const overlap = inputColumns.filter((column) => targetColumns.includes(column));
	if (overlap.length > 0) {
		return { error: `column ${overlap[0]} mapped as both input and target` };
	}
	return {
		kind: "query",
		query: form.query.trim(),
		store: form.store.trim(),
		mapping: { input_columns: inputColumns, target_columns: targetColumns },
	};
}

function splitColumns(text: string): string[] {
	return text
		.split(",")
		.map((part) => part.trim())
		.filter((part) => part.length > 0);
}
