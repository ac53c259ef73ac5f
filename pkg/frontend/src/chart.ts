// Error-graph model and canvas renderer. The model is pure so tests can
// assert what the chart shows (notably its final point) without a DOM.

export interface ChartGeometry {
	width: number;
	height: number;
	padding: number;
}

export interface ChartModel {
	// Pixel-space polyline for the series, left to right.
	points: [number, number][];
	epochs: number;
	finalValue: number | null;
	yMax: number;
}

export function chartModel(series: number[], geometry: ChartGeometry): ChartModel {
	const { width, height, padding } = geometry;
	if (series.length === 0) {
		return { points: [], epochs: 0, finalValue: null, yMax: 0 };
	}
	const yMax = Math.max(...series, Number.EPSILON);
	const innerWidth = width - 2 * padding;
	const innerHeight = height - 2 * padding;
	const xStep = series.length > 1 ? innerWidth / (series.length - 1) : 0;
	const points: [number, number][] = series.map((value, i) => [
		padding + i * xStep,
		padding + innerHeight * (1 - value / yMax),
	]);
	return { points, epochs: series.length, finalValue: series[series.length - 1], yMax };
}

// Polls may never shrink what the user already saw: accept the incoming
// series only when it extends the current one.
export function extendSeries(current: number[], incoming: number[]): number[] {
	if (incoming.length < current.length) return current;
	for (let i = 0; i < current.length; i++) {
		if (incoming[i] !== current[i]) return current;
	}
	return incoming;
}

export function renderErrorChart(canvas: HTMLCanvasElement, series: number[]): ChartModel {
	const model = chartModel(series, {
		width: canvas.width,
		height: canvas.height,
		padding: 24,
	});
	const ctx = canvas.getContext("2d");
	if (!ctx) return model;
	ctx.clearRect(0, 0, canvas.width, canvas.height);
	ctx.strokeStyle = "#8892a6";
	ctx.lineWidth = 1;
	ctx.strokeRect(24, 24, canvas.width - 48, canvas.height - 48);
	if (model.points.length === 0) {
		ctx.fillStyle = "#8892a6";
		ctx.fillText("waiting for first epoch...", 32, canvas.height / 2);
		return model;
	}
	ctx.strokeStyle = "#3566c4";
	ctx.lineWidth = 1.5;
	ctx.beginPath();
	model.points.forEach(([x, y], i) => {
		if (i === 0) ctx.moveTo(x, y);
		else ctx.lineTo(x, y);
	});
	ctx.stroke();
	ctx.fillStyle = "#1d2430";
	ctx.fillText(`epochs: ${model.epochs}`, 28, 16);
	if (model.finalValue !== null) {
		ctx.fillText(`sse: ${model.finalValue.toPrecision(6)}`, canvas.width / 2, 16);
	}
	return model;
}
