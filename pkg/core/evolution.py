"""
Evolution driver - one run from initial data (or a checkpoint) to t_end or a terminal event

Per step:     RATTLE step, flip check on w(t,0,0)
Per cadence:  origin series (Hessian, s), energies, constraint monitor, slice minima
On schedule:  slice profiles at the configured times, checkpoints

Terminal physical events (flip, projection failure) end the run with an
outcome; they are data, not errors. Every artifact carries the config hash and
nothing time-of-day related, so identical configs give identical bytes.

Run directory layout:
    config.ini  origin.csv  energy.csv  constraint.csv  minima.csv
    slices/     snapshots/  summary.json

Each checkpoint step_XXXXXXXX.wmap has a step_XXXXXXXX.json beside it holding
the integrator worst-case counters and the flip detector state, so a resumed
run finishes with the same summary.json as an uninterrupted one.
"""

import json
import logging
import math
from contextvars import ContextVar
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .constants import (
    NUMERICS, ConfigError, ProjectionFailure, RunOutcome, ScalingMethod, SliceDirection, SnapshotError,
)
from .diagnostics import (
    FlipDetector, FlipEvent, IsotropyReport, MinimumTracker, ScalingSeries,
    decrease_hover_increase, extract_slice, hover_duration, origin_sample, rescaled_profile,
)
from .dynamics import SimState, constraint_residual, energy, rescaled_static_w, tangency_residual
from .initial_data import build_initial_state
from .rattle import ForceFn, RattleIntegrator, StepReport, grid_force
from .series import (
    CONSTRAINT_COLUMNS, ENERGY_COLUMNS, MINIMA_COLUMNS, ORIGIN_COLUMNS, RESCALED_COLUMNS,
    SLICE_COLUMNS, SeriesWriter, read_series, write_table,
)
from .snapshot import atomic_write, read_snapshot, write_snapshot

logger = logging.getLogger("wavemap.evolution")

# short config hash of the run in progress, picked up by the log filter
current_run: ContextVar[str] = ContextVar("wavemap_run", default="-")

_SLICE_TAG = {SliceDirection.X_AXIS: "x_axis", SliceDirection.DIAGONAL: "diagonal"}


class Evolution:
    """
    Drives a single evolution and owns its artifacts.

    Usage:
        evo = Evolution(config, out_dir)
        summary = evo.run()                   # or evo.run(resume=snapshot_path)
    """

    def __init__(
        self,
        config: RunConfig,
        out_dir: Path,
        force_fn: Optional[ForceFn] = None,
        dispersal_fraction: Optional[float] = None,
    ):
        self.config = config
        self.out_dir = Path(out_dir)
        self.grid = config.make_grid()
        self.params = config.initial_params()
        self.rattle_cfg = config.rattle_config()
        self.config_hash = config.config_hash()
        self.hash_hex = self.config_hash.hex()
        self.n_steps = int(round(config.time.t_end / self.rattle_cfg.dt))
        if dispersal_fraction is None:
            search = config.search
            dispersal_fraction = search.dispersal_fraction if search else NUMERICS.DISPERSAL_FRACTION
        self.dispersal_fraction = dispersal_fraction

        diag = config.diagnostics
        self.integrator = RattleIntegrator(self.rattle_cfg, force_fn or grid_force(self.grid))
        self.flip_detector = FlipDetector(diag.flip_threshold, diag.flip_guard)
        self.trackers = {d: MinimumTracker(d) for d in SliceDirection}
        self.scaling = ScalingSeries(method=ScalingMethod.GAUSS_CURVATURE)
        self.scaling_mean = ScalingSeries(method=ScalingMethod.MEAN_CURVATURE)

        self.state: Optional[SimState] = None
        self.outcome: Optional[RunOutcome] = None
        self.flip: Optional[FlipEvent] = None
        self.failure: Optional[dict] = None

        self.energy_initial: Optional[float] = None
        self.energy_peak = 0.0
        self.energy_max_deviation = 0.0
        self.local_potential_peak = 0.0
        self.local_potential_last = 0.0

        self._pending_slices = list(diag.slice_times)
        self._writers: dict[str, SeriesWriter] = {}

    # ============================================================
    # RUN
    # ============================================================

    def run(self, resume: Optional[Path] = None) -> dict:
        token = current_run.set(self.hash_hex[:12])
        try:
            return self._run(resume)
        finally:
            for writer in self._writers.values():
                writer.close()
            self._writers.clear()
            current_run.reset(token)

    def _run(self, resume: Optional[Path]) -> dict:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write(self.out_dir / "config.ini", self.config.to_ini())

        if resume is not None:
            header, state = read_snapshot(resume)
            if header.config_hash != self.config_hash:
                raise ConfigError(f"snapshot {resume} was written by a different configuration")
            if header.n != self.grid.n:
                raise ConfigError(f"snapshot {resume} has N={header.n}, config has N={self.grid.n}")
            keep_until = state.t
            logger.info(f"Resuming from {resume} at t={state.t:.8f} (step {state.step})")
        else:
            state = build_initial_state(self.params, self.grid)
            keep_until = None

        self._open_writers(keep_until)
        if resume is not None:
            self._replay_history()
            self._restore_counters(resume, state)
            self._pending_slices = [ts for ts in self._pending_slices if ts > state.t]
        else:
            self.flip_detector.update(state.step, state.t, float(state.q.w[0, 0]))
            self._sample(state, None)
            self._write_due_slices(state)

        self.state = state
        logger.info(
            f"Evolution N={self.grid.n} dt={self.rattle_cfg.dt:.6g} steps={self.n_steps} "
            f"A={self.params.A} B={self.params.B} -> {self.out_dir}"
        )
        self._loop()

        if self.outcome is None:
            self.outcome = self._classify_completed()
        write_snapshot(self.out_dir / "snapshots" / "final.wmap", self.state, self.config_hash)

        summary = self.summary()
        atomic_write(self.out_dir / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
        logger.info(f"Run finished: outcome={self.outcome.value} t={self.state.t:.8f} step={self.state.step}")
        return summary

    def _loop(self) -> None:
        cadence = self.config.diagnostics.cadence
        interval = self.config.output.checkpoint_interval
        state = self.state
        while state.step < self.n_steps:
            try:
                state, report = self.integrator.step(state)
            except ProjectionFailure as e:
                self._record_failure(state, e)
                break
            if not (state.q.is_finite() and state.p.is_finite()):
                self.outcome = RunOutcome.FAILED
                self.state = state
                logger.error(f"non-finite state at t={state.t:.8f} (step {state.step})")
                break

            self.state = state
            event = self.flip_detector.update(state.step, state.t, float(state.q.w[0, 0]))
            if event is not None or state.step % cadence == 0:
                self._sample(state, report)
            self._write_due_slices(state)

            if event is not None:
                self.flip = event
                self.outcome = RunOutcome.FLIPPED
                logger.info(f"Flip at t={event.time:.8f} (step {event.step_index})")
                break
            if interval and state.step % interval == 0:
                self._checkpoint(state)
        self.state = state

    def _checkpoint(self, state: SimState) -> None:
        """Snapshot plus a JSON sidecar with the per-step counters CSV replay cannot rebuild."""
        path = self.out_dir / "snapshots" / f"step_{state.step:08d}.wmap"
        write_snapshot(path, state, self.config_hash)
        sidecar = {
            "config_hash": self.hash_hex,
            "step": state.step,
            "integrator": self.integrator.get_status(),
            "flip_detector": self.flip_detector.get_status(),
        }
        atomic_write(path.with_suffix(".json"), json.dumps(sidecar, sort_keys=True, indent=2) + "\n")

    def _restore_counters(self, snapshot: Path, state: SimState) -> None:
        sidecar = Path(snapshot).with_suffix(".json")
        if not sidecar.exists():
            self.integrator.steps_taken = state.step
            logger.warning(f"no counter file {sidecar.name}; integrator worst-case values restart at resume")
            return
        try:
            saved = json.loads(sidecar.read_text())
        except (OSError, ValueError) as e:
            raise SnapshotError(f"cannot read checkpoint counters {sidecar}: {e}") from e
        if saved.get("config_hash") != self.hash_hex or saved.get("step") != state.step:
            raise ConfigError(f"counter file {sidecar} does not belong to snapshot {snapshot}")
        self.integrator.restore(saved["integrator"])
        self.flip_detector.restore(saved["flip_detector"])

    def _record_failure(self, state: SimState, error: ProjectionFailure) -> None:
        self.outcome = RunOutcome.PROJECTION_FAILURE
        self.state = state
        hovered = len(self.scaling) > 0 and hover_duration(self.scaling) > 0.0
        self.failure = {
            "t": state.t,
            "step": state.step + 1,
            "failed_points": error.failed_points,
            "after_hover": hovered,
        }
        if hovered:
            logger.info(f"Projection failure after the hovering state at t={state.t:.8f}: {error}")
        else:
            logger.warning(f"Projection failure without a hovering state at t={state.t:.8f}: {error}")

    def _classify_completed(self) -> RunOutcome:
        if self.energy_peak == 0.0:
            return RunOutcome.DISPERSED_TRIVIAL
        if self.local_potential_peak > 0.0 and (
            self.local_potential_last < self.dispersal_fraction * self.local_potential_peak
        ):
            return RunOutcome.DISPERSED
        return RunOutcome.INCONCLUSIVE

    # ============================================================
    # DIAGNOSTICS
    # ============================================================

    def _open_writers(self, keep_until: Optional[float]) -> None:
        for name, columns in (("origin", ORIGIN_COLUMNS), ("energy", ENERGY_COLUMNS),
                              ("constraint", CONSTRAINT_COLUMNS), ("minima", MINIMA_COLUMNS)):
            self._writers[name] = SeriesWriter(self.out_dir / f"{name}.csv", columns,
                                               self.hash_hex, keep_until)

    def _sample(self, state: SimState, report: Optional[StepReport]) -> None:
        grid = self.grid
        origin = origin_sample(state, grid)
        self.scaling.append(state.t, origin.s_gauss)
        self.scaling_mean.append(state.t, origin.s_mean)
        self._writers["origin"].write(state.t, origin.w_origin, origin.trace, origin.det,
                                      origin.s_gauss, origin.s_mean)

        e = energy(state, grid, self.config.diagnostics.local_radius)
        self._note_energy(e.total, e.local_potential)
        self._writers["energy"].write(state.t, e.kinetic, e.potential, e.total,
                                      e.local_kinetic, e.local_potential, e.local_total)

        if report is None:
            report = StepReport(
                lambda_max=0.0, projection_iters_max=0,
                constraint_residual_max=float(np.max(np.abs(constraint_residual(state.q)))),
                tangency_residual_max=float(np.max(np.abs(tangency_residual(state.q, state.p)))),
            )
        self._writers["constraint"].write(state.t, report.lambda_max, report.projection_iters_max,
                                          report.constraint_residual_max, report.tangency_residual_max)

        minima = []
        for direction in (SliceDirection.X_AXIS, SliceDirection.DIAGONAL):
            profile = extract_slice(state.q.w, grid, direction, state.t)
            self.trackers[direction].update(profile)
            minima.append(profile.minimum())
        self._writers["minima"].write(state.t, *minima)

    def _note_energy(self, total: float, local_potential: float) -> None:
        if self.energy_initial is None:
            self.energy_initial = total
        elif self.energy_initial > 0.0:
            deviation = abs(total - self.energy_initial) / self.energy_initial
            self.energy_max_deviation = max(self.energy_max_deviation, deviation)
        self.energy_peak = max(self.energy_peak, total)
        self.local_potential_peak = max(self.local_potential_peak, local_potential)
        self.local_potential_last = local_potential

    def _replay_history(self) -> None:
        """Rebuild running diagnostics from the CSV rows kept on resume."""
        _, _, origin = read_series(self._writers["origin"].path)
        for t, w0, s_g, s_m in zip(origin["t"], origin["w_origin"], origin["s_gauss"], origin["s_mean"]):
            self.flip_detector.update(-1, float(t), float(w0))
            self.scaling.append(float(t), None if math.isnan(s_g) else float(s_g))
            self.scaling_mean.append(float(t), None if math.isnan(s_m) else float(s_m))
        _, _, en = read_series(self._writers["energy"].path)
        for total, local in zip(en["E_tot"], en["E_pot_local"]):
            self._note_energy(float(total), float(local))
        _, _, minima = read_series(self._writers["minima"].path)
        for t, wx, wd in zip(minima["t"], minima["w_min_x_axis"], minima["w_min_diagonal"]):
            self.trackers[SliceDirection.X_AXIS].record(float(t), float(wx))
            self.trackers[SliceDirection.DIAGONAL].record(float(t), float(wd))

    def _write_due_slices(self, state: SimState) -> None:
        while self._pending_slices and self._pending_slices[0] <= state.t + 1e-12:
            target = self._pending_slices.pop(0)
            self.write_slices(state, tag=f"t={target:.6f}")

    def write_slices(self, state: SimState, tag: str) -> None:
        """Raw slices along both directions, plus rescaled ones when s(t) is defined."""
        directory = self.out_dir / "slices"
        s = origin_sample(state, self.grid).s_gauss
        for direction, name in _SLICE_TAG.items():
            profile = extract_slice(state.q.w, self.grid, direction, state.t)
            write_table(directory / f"{tag}_{name}.csv", SLICE_COLUMNS,
                        zip(profile.radii, profile.w_values), self.hash_hex)
            if s is not None:
                rescaled = rescaled_profile(state.q.w, self.grid, s, direction, time=state.t)
                write_table(directory / f"{tag}_{name}_rescaled.csv", RESCALED_COLUMNS,
                            zip(rescaled.radii, rescaled.w_values, rescaled_static_w(rescaled.radii, 1.0)),
                            self.hash_hex)
        logger.info(f"Slices written at t={state.t:.8f} ({tag})")

    # ============================================================
    # REPORTING
    # ============================================================

    def summary(self) -> dict:
        minima = {}
        for direction, tracker in self.trackers.items():
            if tracker.samples >= 3:
                t_min, w_min = tracker.result()
                minima[_SLICE_TAG[direction]] = {"t_min": t_min, "w_min": w_min,
                                                  "w_initial": tracker.w_initial}
        isotropy = None
        if len(minima) == 2:
            report = IsotropyReport.from_trackers(self.trackers[SliceDirection.X_AXIS],
                                                  self.trackers[SliceDirection.DIAGONAL])
            if report.w_min_diag != 0.0 and report.t_min_diag != 0.0 and report.w0_min_diag != 0.0:
                isotropy = report.as_dict()

        scaling = {"samples": len(self.scaling)}
        if len(self.scaling):
            t_s, s_min = self.scaling.minimum()
            scaling.update({
                "t_s_min": t_s,
                "s_min": s_min,
                "hover_duration": hover_duration(self.scaling),
                "decrease_hover_increase": decrease_hover_increase(self.scaling),
            })

        return {
            "config_hash": self.hash_hex,
            "outcome": self.outcome.value if self.outcome else None,
            "N": self.grid.n,
            "dt": self.rattle_cfg.dt,
            "A": self.params.A,
            "B": self.params.B,
            "t_end": self.config.time.t_end,
            "t_final": self.state.t if self.state else None,
            "steps": self.state.step if self.state else 0,
            "flip": asdict(self.flip) if self.flip else None,
            "projection_failure": self.failure,
            "minima": minima,
            "isotropy": isotropy,
            "scaling": scaling,
            "energy": {
                "initial_total": self.energy_initial,
                "max_relative_deviation": self.energy_max_deviation,
                "peak_local_potential": self.local_potential_peak,
                "final_local_potential": self.local_potential_last,
                "local_radius": self.config.diagnostics.local_radius,
            },
            "integrator": self.integrator.get_status(),
        }

    def get_status(self) -> dict:
        return {
            "config_hash": self.hash_hex[:12],
            "step": self.state.step if self.state else 0,
            "n_steps": self.n_steps,
            "t": self.state.t if self.state else 0.0,
            "outcome": self.outcome.value if self.outcome else None,
            "scaling_samples": len(self.scaling),
            "flip": self.flip is not None,
            **{f"rattle_{k}": v for k, v in self.integrator.get_status().items()},
        }


def run_evolution(config: RunConfig, out_dir: Path, resume: Optional[Path] = None) -> dict:
    return Evolution(config, out_dir).run(resume=resume)
