// Polling loop: one in-flight request at a time, incremental event
// fetches keyed by log offset, full resync whenever the state asks.

import type { PlatformApi } from './api.js';
import { applyEvents, applySnapshot, type FleetState } from './state.js';

export class Poller {
  private inFlight = false;
  readonly requestedOffsets: number[] = []; // monotonicity is asserted in tests

  constructor(
    private readonly api: PlatformApi,
    public state: FleetState,
  ) {}

  async tick(): Promise<FleetState> {
    if (this.inFlight) return this.state;
    this.inFlight = true;
    try {
      if (this.state.needsResync) {
        const [devices, alarms] = await Promise.all([this.api.devices(), this.api.alarms()]);
        this.state = applySnapshot(this.state, devices, alarms);
      }
      this.requestedOffsets.push(this.state.offset);
      const feed = await this.api.events(this.state.offset);
      this.state = applyEvents(this.state, feed.events, feed.offset);
      this.state.connectionOk = true;
      this.state.lastError = null;
    } catch (err) {
      // surfaced as the connectivity banner, never dropped
      this.state.connectionOk = false;
      this.state.lastError = err instanceof Error ? err.message : String(err);
    } finally {
      this.inFlight = false;
    }
    return this.state;
  }
}
