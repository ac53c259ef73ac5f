// Job status polling: one in-flight request at a time, prefix-safe series
// updates, stops at done/failed.

import type { GatewayApi, JobStatus } from "./api.js";
import { extendSeries } from "./chart.js";

export interface PollerOptions {
	intervalMs?: number;
	onUpdate?: (status: JobStatus, series: number[]) => void;
}

const TERMINAL: JobStatus["phase"][] = ["done", "failed"];

export class JobPoller {
	private stopped = false;
	private series: number[] = [];

	constructor(
		private api: GatewayApi,
		private jobId: string,
		private options: PollerOptions = {},
	) {}

	stop(): void {
		this.stopped = true;
	}

	// Resolves with the terminal status (or the last seen one after stop()).
	async run(): Promise<JobStatus> {
		const interval = this.options.intervalMs ?? 1000;
		let status = await this.poll();
		while (!this.stopped && !TERMINAL.includes(status.phase)) {
			await sleep(interval);
			status = await this.poll();
		}
		return status;
	}

	private async poll(): Promise<JobStatus> {
		const status = await this.api.jobStatus(this.jobId);
		this.series = extendSeries(this.series, status.error_series_so_far);
		this.options.onUpdate?.(status, this.series);
		return status;
	}
}

function sleep(ms: number): Promise<void> {
	return new Promise((resolve) => setTimeout(resolve, ms));
}
