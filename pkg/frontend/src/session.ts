// Portal session state. Only identifiers live here; content is always
// re-fetched from the gateway, so a page reload resumes cleanly.

export interface StorageLike {
	getItem(key: string): string | null;
	setItem(key: string, value: string): void;
	removeItem(key: string): void;
}

export interface PortalState {
	token: string | null;
	user: string | null;
	paradigmId: string | null;
	networkId: string | null;
	activeJobId: string | null;
	lastTrainingKey: string | null;
}

const STORAGE_KEY = "nnfabric-portal-state";

const EMPTY: PortalState = {
	token: null,
	user: null,
	paradigmId: null,
	networkId: null,
	activeJobId: null,
	lastTrainingKey: null,
};

export class PortalSession {
	state: PortalState = { ...EMPTY };

	constructor(private storage: StorageLike | null = null) {
		this.restore();
	}

	private restore(): void {
		if (!this.storage) return;
		const raw = this.storage.getItem(STORAGE_KEY);
		if (!raw) return;
		try {
			this.state = { ...EMPTY, ...(JSON.parse(raw) as Partial<PortalState>) };
		} catch {
			this.storage.removeItem(STORAGE_KEY);
		}
	}

	private persist(): void {
		this.storage?.setItem(STORAGE_KEY, JSON.stringify(this.state));
	}

	loggedIn(token: string, user: string): void {
		this.state = { ...EMPTY, token, user };
		this.persist();
	}

	logout(): void {
		this.state = { ...EMPTY };
		this.storage?.removeItem(STORAGE_KEY);
	}

	selectParadigm(paradigmId: string): void {
		// Downstream choices belong to the previous paradigm; drop them.
		this.state = { ...this.state, paradigmId, networkId: null, activeJobId: null, lastTrainingKey: null };
		this.persist();
	}

	networkCreated(networkId: string): void {
		this.state = { ...this.state, networkId, activeJobId: null };
		this.persist();
	}

	jobStarted(jobId: string): void {
		this.state = { ...this.state, activeJobId: jobId };
		this.persist();
	}

	// Called when a finished job's result is acknowledged by the user.
	jobAcknowledged(trainingKey: string | null): void {
		this.state = { ...this.state, activeJobId: null, lastTrainingKey: trainingKey ?? this.state.lastTrainingKey };
		this.persist();
	}
}
