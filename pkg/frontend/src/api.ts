// Typed client for the gateway HTTP+JSON API (/api/v1).
// The fetch implementation is injectable for tests.

export interface LoginResponse {
	session_id: string;
	user: string;
	expires_at: number;
}

export interface QueryResponse {
	columns: string[];
	rows: (string | number)[][];
}

export interface TopologyDoc {
	min_layers: number;
	max_layers: number;
	connectivity: string;
	layer_size_bounds?: [number, number][];
}

export interface HyperparamDoc {
	name: string;
	kind: "real" | "integer" | "enumeration";
	default: number | string;
	range?: [number, number];
	values?: (number | string)[];
}

export interface DescriptorDoc {
	id: string;
	name: string;
	version: string;
	description: string;
	topology: TopologyDoc;
	hyperparams: HyperparamDoc[];
	io_schema: { input_dim: number | "variable"; output_dim: number | "variable" };
	engine_ref: string;
}

export interface ParadigmDetail {
	paradigm_id: string;
	owner: string;
	mode: string;
	replicated_to: string[];
	descriptor: DescriptorDoc;
	summary: string;
}

export interface JobStatus {
	job_id: string;
	phase: "queued" | "running" | "done" | "failed";
	error_series_so_far: number[];
	result_key: string | null;
	failure_reason: string | null;
}

export interface ResultMetadata {
	owner: string;
	created_at: number;
	paradigm_id: string | null;
	parent: string | null;
}

export interface ResultEnvelope {
	key: string;
	metadata: ResultMetadata;
	payload: Record<string, unknown>;
}

export interface ResultListing {
	results: { key: string; owner: string; created_at: number; paradigm_id: string | null; parent: string | null }[];
}

export interface DatastreamSpec {
	kind: "explicit" | "query";
	inputs?: number[][];
	targets?: number[][] | null;
	query?: string;
	store?: string;
	mapping?: { input_columns: string[]; target_columns: string[] };
}

export interface TrainingParamsDoc {
	learning_rate: number;
	momentum: number;
	max_epochs: number;
	target_error: number;
	seed: number;
}

export class ApiError extends Error {
	constructor(
		public status: number,
		public code: string,
		message: string,
	) {
		super(message);
	}
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayApi {
	token: string | null = null;

	constructor(
		private baseUrl: string,
		private fetchFn: FetchLike = (...args) => globalThis.fetch(...args),
	) {}

	private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
		const headers: Record<string, string> = { "Content-Type": "application/json" };
		if (this.token) headers["X-Session-Id"] = this.token;
		const response = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, {
			method,
			headers,
			body: body === undefined ? undefined : JSON.stringify(body),
		});
		if (!response.ok) {
			let code = "http_error";
			let message = `HTTP ${response.status}`;
			try {
				const parsed = (await response.json()) as { error?: { code?: string; message?: string } };
				code = parsed.error?.code ?? code;
				message = parsed.error?.message ?? message;
			} catch {
				// non-JSON error body; keep defaults
			}
			throw new ApiError(response.status, code, message);
		}
		return (await response.json()) as T;
	}

	health(): Promise<{ status: string }> {
		return this.request("GET", "/health");
	}

	async login(user: string, password: string): Promise<LoginResponse> {
		const result = await this.request<LoginResponse>("POST", "/login", { user, password });
		this.token = result.session_id;
		return result;
	}

	queryParadigms(query: string): Promise<QueryResponse> {
		return this.request("POST", "/paradigms/query", { query });
	}

	getParadigm(paradigmId: string): Promise<ParadigmDetail> {
		return this.request("GET", `/paradigms/${encodeURIComponent(paradigmId)}`);
	}

	createNetwork(
		paradigmId: string,
		layerSizes: number[],
		activation: string,
		seed: number,
	): Promise<{ network_id: string; key: string }> {
		return this.request("POST", "/networks/create", {
			paradigm_id: paradigmId,
			layer_sizes: layerSizes,
			activation,
			seed,
		});
	}

	submitTrain(
		networkId: string,
		datastream: DatastreamSpec,
		params: TrainingParamsDoc,
		kind: "train" | "retrain" = "train",
		resultKey: string | null = null,
	): Promise<{ job_id: string }> {
		return this.request("POST", "/jobs/train", {
			network_id: networkId,
			datastream,
			params,
			kind,
			result_key: resultKey,
		});
	}

	submitEvaluate(resultKey: string, datastream: DatastreamSpec): Promise<{ job_id: string }> {
		return this.request("POST", "/jobs/evaluate", { result_key: resultKey, datastream });
	}

	jobStatus(jobId: string): Promise<JobStatus> {
		return this.request("GET", `/jobs/${encodeURIComponent(jobId)}/status`);
	}

	getResult(key: string): Promise<ResultEnvelope> {
		return this.request("GET", `/results/${key}`);
	}

	listResults(kind: string): Promise<ResultListing> {
		return this.request("GET", `/results?kind=${encodeURIComponent(kind)}`);
	}

	ledger(): Promise<{ records: Record<string, unknown>[]; total: number }> {
		return this.request("GET", "/ledger");
	}
}
