import { describe, expect, it } from "vitest";

import type { DescriptorDoc } from "../src/api.js";
import {
	buildQueryStream,
	parseExplicitPatterns,
	parseLayerSizes,
	validateLayerSizes,
	validateTrainingParams,
} from "../src/validate.js";

const DESCRIPTOR: DescriptorDoc = {
	id: "backprop-3layer",
	name: "backprop",
	version: "1.0",
	description: "",
	topology: { min_layers: 3, max_layers: 3, connectivity: "fully_connected" },
	hyperparams: [],
	io_schema: { input_dim: "variable", output_dim: "variable" },
	engine_ref: "backprop",
};

describe("parseLayerSizes", () => {
	it("parses comma-separated sizes", () => {
		expect(parseLayerSizes(" 2, 2 ,1 ")).toEqual([2, 2, 1]);
	});

	it("rejects junk", () => {
		expect(parseLayerSizes("2, two, 1")).toBeNull();
		expect(parseLayerSizes("")).toBeNull();
		expect(parseLayerSizes("2.5, 1")).toBeNull();
	});
});

describe("validateLayerSizes", () => {
	it("accepts a conforming network", () => {
		expect(validateLayerSizes(DESCRIPTOR, [2, 2, 1])).toEqual([]);
	});

	it("flags an out-of-bounds layer count (submit stays disabled)", () => {
		const problems = validateLayerSizes(DESCRIPTOR, [2, 1]);
		expect(problems).toHaveLength(1);
		expect(problems[0]).toContain("3 layers");
	});

	it("enforces per-layer unit bounds when declared", () => {
		const bounded: DescriptorDoc = {
			...DESCRIPTOR,
			topology: {
				...DESCRIPTOR.topology,
				layer_size_bounds: [
					[1, 4],
					[1, 2],
					[1, 1],
				],
			},
		};
		expect(validateLayerSizes(bounded, [2, 2, 1])).toEqual([]);
		expect(validateLayerSizes(bounded, [2, 3, 1])[0]).toContain("layer 2");
	});

	it("enforces fixed io dimensions", () => {
		const fixed: DescriptorDoc = {
			...DESCRIPTOR,
			io_schema: { input_dim: 2, output_dim: 1 },
		};
		expect(validateLayerSizes(fixed, [2, 4, 1])).toEqual([]);
		expect(validateLayerSizes(fixed, [3, 4, 1])[0]).toContain("input layer");
	});
});

describe("validateTrainingParams", () => {
	const good = { learning_rate: 0.5, momentum: 0.9, max_epochs: 100, target_error: 0.01, seed: 0 };

	it("accepts sane parameters", () => {
		expect(validateTrainingParams(good)).toEqual([]);
	});

	it("rejects out-of-range values", () => {
		expect(validateTrainingParams({ ...good, learning_rate: 0 })).toHaveLength(1);
		expect(validateTrainingParams({ ...good, momentum: 1 })).toHaveLength(1);
		expect(validateTrainingParams({ ...good, max_epochs: 2.5 })).toHaveLength(1);
		expect(validateTrainingParams({ ...good, target_error: -1 })).toHaveLength(1);
	});
});

describe("parseExplicitPatterns", () => {
	it("parses the arrow form", () => {
		const parsed = parseExplicitPatterns("0,0 -> 0\n0,1 -> 1\n");
		expect(parsed).toEqual({ inputs: [[0, 0], [0, 1]], targets: [[0], [1]] });
	});

	it("rejects empty input (evaluation blocked client-side)", () => {
		expect(parseExplicitPatterns("  \n ")).toEqual({ error: "no patterns given" });
	});

	it("rejects ragged rows with the line number", () => {
		const parsed = parseExplicitPatterns("0,0 -> 0\n1 -> 1");
		expect("error" in parsed && parsed.error).toContain("line 2");
	});

	it("rejects non-numeric values", () => {
		const parsed = parseExplicitPatterns("a,b -> 1");
		expect("error" in parsed && parsed.error).toContain("numbers");
	});
});

describe("buildQueryStream", () => {
	it("builds a query datastream spec", () => {
		expect(
			buildQueryStream({
				query: "SELECT a, b, xor FROM xor",
				store: "xor",
				inputColumns: "a, b",
				targetColumns: "xor",
			}),
		).toEqual({
			kind: "query",
			query: "SELECT a, b, xor FROM xor",
			store: "xor",
			mapping: { input_columns: ["a", "b"], target_columns: ["xor"] },
		});
	});

	it("rejects overlapping mappings and empty inputs", () => {
		const overlap = buildQueryStream({
			query: "SELECT a FROM t",
			store: "t",
			inputColumns: "a",
			targetColumns: "a",
		});
		expect("error" in overlap && overlap.error).toContain("both input and target");
		const empty = buildQueryStream({
			query: "SELECT a FROM t",
			store: "t",
			inputColumns: "",
			targetColumns: "",
		});
		expect("error" in empty).toBe(true);
	});
});
