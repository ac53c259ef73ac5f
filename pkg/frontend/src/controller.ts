// Workflow operations behind the screens. The DOM layer and the
// integration tests drive the gateway through this one surface.

import type {
	DatastreamSpec,
	GatewayApi,
	JobStatus,
	ParadigmDetail,
	QueryResponse,
	ResultEnvelope,
	TrainingParamsDoc,
} from "./api.js";
import { JobPoller } from "./poller.js";
import type { PortalSession } from "./session.js";

export class PortalController {
	constructor(
		public api: GatewayApi,
		public session: PortalSession,
		private pollIntervalMs = 1000,
	) {
		// Resuming after a reload: the stored token re-authorizes requests.
		if (session.state.token) api.token = session.state.token;
	}

	async login(user: string, password: string): Promise<void> {
		const result = await this.api.login(user, password);
		this.session.loggedIn(result.session_id, result.user);
	}

	logout(): void {
		this.api.token = null;
		this.session.logout();
	}

	subscribe(queryText: string): Promise<QueryResponse> {
		return this.api.queryParadigms(queryText);
	}

	async selectParadigm(paradigmId: string): Promise<ParadigmDetail> {
		const detail = await this.api.getParadigm(paradigmId);
		this.session.selectParadigm(paradigmId);
		return detail;
	}

	async createNetwork(layerSizes: number[], activation: string, seed: number): Promise<string> {
		const paradigmId = this.session.state.paradigmId;
		if (!paradigmId) throw new Error("no paradigm selected");
		const created = await this.api.createNetwork(paradigmId, layerSizes, activation, seed);
		this.session.networkCreated(created.network_id);
		return created.network_id;
	}

	async startTraining(
		params: TrainingParamsDoc,
		datastream: DatastreamSpec,
		kind: "train" | "retrain" = "train",
	): Promise<string> {
		const networkId = this.session.state.networkId;
		if (!networkId) throw new Error("no network instantiated");
		const resultKey = kind === "retrain" ? this.session.state.lastTrainingKey : null;
		if (kind === "retrain" && !resultKey) throw new Error("nothing to retrain from");
		const submitted = await this.api.submitTrain(networkId, datastream, params, kind, resultKey);
		this.session.jobStarted(submitted.job_id);
		return submitted.job_id;
	}

	async startEvaluation(trainingKey: string, datastream: DatastreamSpec): Promise<string> {
		const submitted = await this.api.submitEvaluate(trainingKey, datastream);
		this.session.jobStarted(submitted.job_id);
		return submitted.job_id;
	}

	// Polls the active job until it finishes; onSeries sees every update
	// with the prefix property already enforced.
	async followJob(onSeries?: (series: number[], status: JobStatus) => void): Promise<JobStatus> {
		const jobId = this.session.state.activeJobId;
		if (!jobId) throw new Error("no active job");
		const poller = new JobPoller(this.api, jobId, {
			intervalMs: this.pollIntervalMs,
			onUpdate: (status, series) => onSeries?.(series, status),
		});
		const status = await poller.run();
		if (status.phase === "done" || status.phase === "failed") {
			const trainingKey = status.result_key?.startsWith("training_result/")
				? status.result_key
				: null;
			this.session.jobAcknowledged(trainingKey);
		}
		return status;
	}

	listTrainingResults() {
		return this.api.listResults("training_result");
	}

	fetchResult(key: string): Promise<ResultEnvelope> {
		return this.api.getResult(key);
	}

	permalink(key: string): string {
		return `/api/v1/results/${key}`;
	}
}
