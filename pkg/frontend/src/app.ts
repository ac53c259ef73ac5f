// Screen wiring. One responsive layout, four screens: login, paradigm
// subscription, training, evaluation. All decisions are re-checked by the
// gateway; checks here only guide the forms.

import { ApiError, type DatastreamSpec, type JobStatus, type TrainingParamsDoc } from "./api.js";
import { renderErrorChart } from "./chart.js";
import type { PortalController } from "./controller.js";
import {
	buildQueryStream,
	parseExplicitPatterns,
	parseLayerSizes,
	validateLayerSizes,
	validateTrainingParams,
} from "./validate.js";

function el<T extends HTMLElement>(id: string): T {
	const found = document.getElementById(id);
	if (!found) throw new Error(`missing element #${id}`);
	return found as T;
}

function show(screen: "login" | "browse" | "training" | "evaluation"): void {
	for (const name of ["login", "browse", "training", "evaluation"]) {
		el(`screen-${name}`).classList.toggle("hidden", name !== screen);
	}
}

function setText(id: string, text: string): void {
	el(id).textContent = text;
}

function errorText(error: unknown): string {
	if (error instanceof ApiError) return error.message;
	return error instanceof Error ? error.message : String(error);
}

export class PortalApp {
	private selectedDescriptor: import("./api.js").ParadigmDetail | null = null;

	constructor(private controller: PortalController) {}

	start(): void {
		this.bindLogin();
		this.bindBrowse();
		this.bindTraining();
		this.bindEvaluation();
		void this.resume();
	}

	// After a reload everything resumes from gateway state.
	private async resume(): Promise<void> {
		const state = this.controller.session.state;
		if (!state.token) {
			show("login");
			return;
		}
		setText("whoami", state.user ?? "");
		if (state.activeJobId) {
			show("training");
			await this.followTraining();
			return;
		}
		show("browse");
		await this.runQuery();
	}

	// -- login ---------------------------------------------------------------

	private bindLogin(): void {
		el<HTMLFormElement>("login-form").addEventListener("submit", async (event) => {
			event.preventDefault();
			setText("login-error", "");
			try {
				await this.controller.login(
					el<HTMLInputElement>("login-user").value,
					el<HTMLInputElement>("login-password").value,
				);
				setText("whoami", this.controller.session.state.user ?? "");
				show("browse");
				await this.runQuery();
			} catch (error) {
				setText("login-error", errorText(error));
			}
		});
		el("logout").addEventListener("click", () => {
			this.controller.logout();
			show("login");
		});
	}

	private async guarded<T>(action: () => Promise<T>, errorId: string): Promise<T | null> {
		setText(errorId, "");
		try {
			return await action();
		} catch (error) {
			if (error instanceof ApiError && error.status === 401) {
				// Session expired mid-use: back to login.
				this.controller.logout();
				show("login");
				setText("login-error", "session expired, log in again");
				return null;
			}
			setText(errorId, errorText(error));
			return null;
		}
	}

	// -- paradigm subscription --------------------------------------------------

	private bindBrowse(): void {
		el<HTMLFormElement>("query-form").addEventListener("submit", async (event) => {
			event.preventDefault();
			await this.runQuery();
		});
		el<HTMLFormElement>("instantiate-form").addEventListener("submit", async (event) => {
			event.preventDefault();
			await this.createNetwork();
		});
		el<HTMLInputElement>("layers").addEventListener("input", () => this.checkInstantiateForm());
	}

	private async runQuery(): Promise<void> {
		const queryText = el<HTMLInputElement>("query-text").value;
		const result = await this.guarded(() => this.controller.subscribe(queryText), "browse-error");
		if (!result) return;
		const cards = el("paradigm-cards");
		cards.innerHTML = "";
		const idIndex = result.columns.indexOf("id");
		for (const row of result.rows) {
			const card = document.createElement("button");
			card.type = "button";
			card.className = "card";
			card.textContent = result.columns
				.map((column, i) => `${column}: ${row[i]}`)
				.join("\n");
			const paradigmId = String(row[idIndex >= 0 ? idIndex : 0]);
			card.addEventListener("click", () => void this.selectParadigm(paradigmId));
			cards.appendChild(card);
		}
		setText("browse-hint", result.rows.length ? "" : "no paradigms matched the query");
	}

	private async selectParadigm(paradigmId: string): Promise<void> {
		const detail = await this.guarded(
			() => this.controller.selectParadigm(paradigmId),
			"browse-error",
		);
		if (!detail) return;
		this.selectedDescriptor = detail;
		setText("descriptor-summary", detail.summary);
		el("instantiate-panel").classList.remove("hidden");
		this.checkInstantiateForm();
	}

	private checkInstantiateForm(): void {
		const submit = el<HTMLButtonElement>("instantiate-submit");
		if (!this.selectedDescriptor) {
			submit.disabled = true;
			return;
		}
		const sizes = parseLayerSizes(el<HTMLInputElement>("layers").value);
		if (!sizes) {
			setText("instantiate-problems", "layer sizes: comma-separated positive integers");
			submit.disabled = true;
			return;
		}
		const problems = validateLayerSizes(this.selectedDescriptor.descriptor, sizes);
		setText("instantiate-problems", problems.join("; "));
		submit.disabled = problems.length > 0;
	}

	private async createNetwork(): Promise<void> {
		const sizes = parseLayerSizes(el<HTMLInputElement>("layers").value);
		if (!sizes) return;
		const created = await this.guarded(
			() =>
				this.controller.createNetwork(
					sizes,
					el<HTMLSelectElement>("activation").value,
					Number(el<HTMLInputElement>("seed").value || "0"),
				),
			"browse-error",
		);
		if (!created) return;
		setText("network-id", created);
		show("training");
	}

	// -- training -----------------------------------------------------------

	private bindTraining(): void {
		for (const mode of ["explicit", "query"]) {
			el<HTMLInputElement>(`mode-${mode}`).addEventListener("change", () => {
				el("explicit-editor").classList.toggle("hidden", mode !== "explicit");
				el("query-editor").classList.toggle("hidden", mode !== "query");
			});
		}
		el<HTMLFormElement>("training-form").addEventListener("submit", async (event) => {
			event.preventDefault();
			await this.startTraining("train");
		});
		el("retrain").addEventListener("click", () => void this.startTraining("retrain"));
		el("to-evaluation").addEventListener("click", () => {
			show("evaluation");
			void this.refreshTrainingResults();
		});
		el("back-to-browse").addEventListener("click", () => show("browse"));
	}

	private readDatastream(): DatastreamSpec | null {
		const explicitMode = el<HTMLInputElement>("mode-explicit").checked;
		if (explicitMode) {
			const parsed = parseExplicitPatterns(el<HTMLTextAreaElement>("explicit-patterns").value);
			if ("error" in parsed) {
				setText("training-error", parsed.error);
				return null;
			}
			return { kind: "explicit", inputs: parsed.inputs, targets: parsed.targets };
		}
		const spec = buildQueryStream({
			query: el<HTMLInputElement>("stream-query").value,
			store: el<HTMLInputElement>("stream-store").value,
			inputColumns: el<HTMLInputElement>("stream-inputs").value,
			targetColumns: el<HTMLInputElement>("stream-targets").value,
		});
		if ("error" in spec) {
			setText("training-error", spec.error);
			return null;
		}
		return spec;
	}

	private readParams(): TrainingParamsDoc | null {
		const params: TrainingParamsDoc = {
			learning_rate: Number(el<HTMLInputElement>("lr").value),
			momentum: Number(el<HTMLInputElement>("momentum").value),
			max_epochs: Number(el<HTMLInputElement>("max-epochs").value),
			target_error: Number(el<HTMLInputElement>("target-error").value),
			seed: Number(el<HTMLInputElement>("train-seed").value || "0"),
		};
		const problems = validateTrainingParams(params);
		if (problems.length > 0) {
			setText("training-error", problems.join("; "));
			return null;
		}
		return params;
	}

	private async startTraining(kind: "train" | "retrain"): Promise<void> {
		const params = this.readParams();
		const datastream = this.readDatastream();
		if (!params || !datastream) return;
		el("completion-panel").classList.add("hidden");
		const started = await this.guarded(
			() => this.controller.startTraining(params, datastream, kind),
			"training-error",
		);
		if (!started) return;
		await this.followTraining();
	}

	private async followTraining(): Promise<void> {
		const canvas = el<HTMLCanvasElement>("error-chart");
		const status = await this.guarded(
			() =>
				this.controller.followJob((series, update) => {
					renderErrorChart(canvas, series);
					setText("job-phase", `${update.job_id}: ${update.phase}`);
				}),
			"training-error",
		);
		if (!status) return;
		this.showCompletion(status);
	}

	private showCompletion(status: JobStatus): void {
		el("completion-panel").classList.remove("hidden");
		if (status.phase === "failed") {
			setText("completion-text", status.failure_reason ?? "job failed");
			el("retrain").classList.add("hidden");
			return;
		}
		const series = status.error_series_so_far;
		const finalSse = series.length ? series[series.length - 1] : null;
		setText(
			"completion-text",
			`stored ${status.result_key} after ${series.length} epochs` +
				(finalSse === null ? "" : `, final sse ${finalSse.toPrecision(6)}`),
		);
		el("retrain").classList.remove("hidden");
	}

	// -- evaluation -----------------------------------------------------------

	private bindEvaluation(): void {
		el<HTMLFormElement>("evaluation-form").addEventListener("submit", async (event) => {
			event.preventDefault();
			await this.runEvaluation();
		});
		el("back-to-training").addEventListener("click", () => show("training"));
	}

	private async refreshTrainingResults(): Promise<void> {
		const listing = await this.guarded(
			() => this.controller.listTrainingResults(),
			"evaluation-error",
		);
		if (!listing) return;
		const select = el<HTMLSelectElement>("training-result-pick");
		select.innerHTML = "";
		for (const item of listing.results) {
			const option = document.createElement("option");
			option.value = item.key;
			option.textContent = `${item.key} (${item.owner})`;
			select.appendChild(option);
		}
		setText("evaluation-hint", listing.results.length ? "" : "no training results archived yet");
	}

	private async runEvaluation(): Promise<void> {
		const parsed = parseExplicitPatterns(el<HTMLTextAreaElement>("eval-patterns").value);
		if ("error" in parsed) {
			setText("evaluation-error", parsed.error);
			return;
		}
		const spec: DatastreamSpec = { kind: "explicit", inputs: parsed.inputs, targets: parsed.targets };
		const key = el<HTMLSelectElement>("training-result-pick").value;
		if (!key) {
			setText("evaluation-error", "pick a training result first");
			return;
		}
		const jobId = await this.guarded(
			() => this.controller.startEvaluation(key, spec),
			"evaluation-error",
		);
		if (!jobId) return;
		const status = await this.guarded(() => this.controller.followJob(), "evaluation-error");
		if (!status) return;
		if (status.phase === "failed" || !status.result_key) {
			setText("evaluation-error", status.failure_reason ?? "evaluation failed");
			return;
		}
		const envelope = await this.guarded(
			() => this.controller.fetchResult(status.result_key as string),
			"evaluation-error",
		);
		if (!envelope) return;
		const outputs = envelope.payload.outputs as number[][];
		const errors = envelope.payload.per_pattern_error as number[] | null;
		const table = el("evaluation-table");
		table.innerHTML = "";
		outputs.forEach((row, i) => {
			const tr = document.createElement("tr");
			const cells = [String(i), row.map((v) => v.toPrecision(6)).join(", ")];
			if (errors) cells.push(errors[i].toPrecision(6));
			for (const cell of cells) {
				const td = document.createElement("td");
				td.textContent = cell;
				tr.appendChild(td);
			}
			table.appendChild(tr);
		});
		const link = el<HTMLAnchorElement>("evaluation-permalink");
		link.href = this.controller.permalink(envelope.key);
		link.textContent = envelope.key;
	}
}
