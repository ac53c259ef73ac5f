import { describe, expect, it } from "vitest";

import { chartModel, extendSeries } from "../src/chart.js";

const GEOMETRY = { width: 640, height: 280, padding: 24 };

describe("chartModel", () => {
	it("renders exactly the series: one point per epoch, final value preserved", () => {
		const series = [4.0, 2.0, 1.0, 0.5];
		const model = chartModel(series, GEOMETRY);
		expect(model.epochs).toBe(4);
		expect(model.points).toHaveLength(4);
		expect(model.finalValue).toBe(0.5);
	});

	it("is empty for an empty series", () => {
		const model = chartModel([], GEOMETRY);
		expect(model.points).toEqual([]);
		expect(model.finalValue).toBeNull();
	});

	it("spans the padded drawing area left to right, max at the top", () => {
		const model = chartModel([2.0, 1.0], GEOMETRY);
		expect(model.points[0][0]).toBe(24);
		expect(model.points[1][0]).toBe(640 - 24);
		expect(model.points[0][1]).toBe(24); // max value sits at the top edge
		expect(model.yMax).toBe(2.0);
	});

	it("handles a single epoch without dividing by zero", () => {
		const model = chartModel([1.5], GEOMETRY);
		expect(model.points).toHaveLength(1);
		expect(Number.isFinite(model.points[0][0])).toBe(true);
	});
});

describe("extendSeries (prefix property)", () => {
	it("accepts proper extensions", () => {
		expect(extendSeries([3, 2], [3, 2, 1])).toEqual([3, 2, 1]);
		expect(extendSeries([], [5])).toEqual([5]);
	});

	it("never shrinks what was already shown", () => {
		expect(extendSeries([3, 2, 1], [3, 2])).toEqual([3, 2, 1]);
	});

	it("rejects a mismatching prefix", () => {
		expect(extendSeries([3, 2], [9, 9, 9])).toEqual([3, 2]);
	});

	it("keeps the same series on an identical poll", () => {
		expect(extendSeries([3, 2], [3, 2])).toEqual([3, 2]);
	});
});
