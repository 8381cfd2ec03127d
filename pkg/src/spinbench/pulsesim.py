"""Selective-pulse density-matrix simulation on the full level structure.

The state is a density matrix in the eigenbasis of the static Hamiltonian,
viewed in the frame where every level is stationary. Each pulse rotates
one level pair (the transition nearest its carrier on its channel); delays
only apply phenomenological relaxation:

* population relaxation contracts the state toward thermal equilibrium,
  ``rho -> s rho + (1 - s) rho_eq`` with ``s = exp(-t / t1e)``;
* coherences between different M_S decay with the stretched envelope
  ``exp[-(t / t2e)^m]``, coherences between different M_I with
  ``exp[-(t / t2n)^m]`` (both factors for elements differing in both).

The stretched envelope is not multiplicative over split delays, so each
class keeps a dephasing clock: the summed length of every earlier delay
during which that class of coherence was present. A delay of length d
multiplies the class by ``E(t + d) / E(t)`` and advances the clock, so a
two-pulse echo with total free time 2 tau decays exactly as
``exp[-(2 tau / t2e)^m]``.

Both relaxation maps are convex mixtures of positive maps, so Hermiticity,
trace and positivity are preserved. Units: frequencies MHz, pulse and
delay durations ns, t1e s, t2e/t2n us.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .constants import DEFAULT_CONSTANTS, PhysicalConstants
from .core import SpinSystem
from .dynamics import boltzmann_populations
from .hamiltonian import EigenSystem, diagonalize

__all__ = [
    "PulseEvent",
    "Delay",
    "Acquire",
    "Sweep",
    "PulseSequence",
    "RelaxationSpec",
    "RabiDrive",
    "SignalTrace",
    "OffResonanceError",
    "rabi_frequency",
    "rabi_for_pi",
    "pair_rotation",
    "Propagator",
    "run_events",
    "run_sequence",
    "hahn_echo_sequence",
    "inversion_recovery_sequence",
    "nutation_sequence",
    "davies_endor_sequence",
    "nuclear_rabi_sequence",
    "nuclear_transfer_sequence",
    "davies_endor",
    "load_sequence",
    "sequence_from_dict",
]

_PRESENCE_TOL = 1e-12


class OffResonanceError(ValueError):
    """A pulse carrier is not within its Rabi bandwidth of any transition."""


@dataclass(frozen=True)
class PulseEvent:
    """A rectangular selective pulse.

    ``amplitude`` is the Rabi frequency (MHz) on the resonant pair. Either
    ``carrier_frequency`` (MHz) or an explicit eigenstate ``pair`` selects
    the transition; with only a pair the carrier is set to its exact
    frequency. ``allow_off_resonant`` turns a pulse that finds no transition
    within bandwidth into a no-op instead of an error (swept RF in ENDOR).
    """

    channel: str
    carrier_frequency: float | None
    duration: float
    phase: float = 0.0
    amplitude: float = 0.0
    pair: tuple[int, int] | None = None
    allow_off_resonant: bool = False
    label: str = ""

    def __post_init__(self):
        ch = self.channel.upper()
        if ch not in ("MW", "RF"):
            raise ValueError(f"channel must be MW or RF, got {self.channel!r}")
        object.__setattr__(self, "channel", ch)
        if not self.duration > 0:
            raise ValueError("pulse duration must be positive")
        if self.amplitude < 0:
            raise ValueError("pulse amplitude must be non-negative")
        if self.carrier_frequency is None and self.pair is None:
            raise ValueError("pulse needs a carrier frequency or an explicit pair")

    @classmethod
    def rotation(cls, channel, angle: float, amplitude: float, carrier_frequency=None, **kw) -> "PulseEvent":
        """Pulse whose length gives flip ``angle`` (radians) at Rabi ``amplitude``."""
        if not amplitude > 0:
            raise ValueError("amplitude must be positive to derive a duration")
        duration = 1e3 * angle / (2 * math.pi * amplitude)
        return cls(channel, carrier_frequency, duration, amplitude=amplitude, **kw)

    @property
    def angle(self) -> float:
        return 2 * math.pi * self.amplitude * self.duration * 1e-3


@dataclass(frozen=True)
class Delay:
    duration: float
    label: str = ""

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class Acquire:
    """Detection on one level pair.

    ``mode`` is ``"magnitude"`` (|rho_ab|), ``"phased"`` (the in-phase echo
    component, positive for an unperturbed two-pulse echo) or
    ``"polarization"`` (rho_aa - rho_bb). The pair defaults to the one
    driven by the most recent MW pulse.
    """

    mode: str = "magnitude"
    phase: float = 0.0
    pair: tuple[int, int] | None = None
    label: str = ""

    def __post_init__(self):
        if self.mode not in ("magnitude", "phased", "polarization"):
            raise ValueError(f"unknown acquire mode {self.mode!r}")


Event = Union[PulseEvent, Delay, Acquire]

_SWEEP_PARAMS = {
    "duration_ns": "duration",
    "duration": "duration",
    "frequency_MHz": "carrier_frequency",
    "carrier_frequency": "carrier_frequency",
    "phase_rad": "phase",
    "phase": "phase",
    "amplitude_MHz": "amplitude",
    "amplitude": "amplitude",
}


@dataclass(frozen=True)
class Sweep:
    """One parameter of one or more events stepped over ``values``."""

    targets: tuple
    parameter: str
    values: tuple

    def __post_init__(self):
        targets = self.targets if isinstance(self.targets, (tuple, list)) else (self.targets,)
        object.__setattr__(self, "targets", tuple(targets))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.parameter not in _SWEEP_PARAMS:
            raise ValueError(f"cannot sweep {self.parameter!r}")
        if not self.values:
            raise ValueError("sweep has no values")

    @property
    def attribute(self) -> str:
        return _SWEEP_PARAMS[self.parameter]


@dataclass(frozen=True)
class PulseSequence:
    events: tuple
    sweep: Sweep | None = None

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        n_acq = sum(isinstance(e, Acquire) for e in events)
        if n_acq != 1:
            raise ValueError(f"sequence needs exactly one Acquire, found {n_acq}")
        if not isinstance(events[-1], Acquire):
            raise ValueError("Acquire must be the last event")
        if self.sweep is not None:
            for t in self.sweep.targets:
                ev = events[self._index(t)]
                if not hasattr(ev, self.sweep.attribute):
                    raise ValueError(
                        f"event {t!r} ({type(ev).__name__}) has no parameter {self.sweep.parameter!r}"
                    )

    def _index(self, target) -> int:
        if isinstance(target, int):
            if not -len(self.events) <= target < len(self.events):
                raise ValueError(f"sweep target index {target} out of range")
            return target % len(self.events)
        for k, ev in enumerate(self.events):
            if getattr(ev, "label", None) == target:
                return k
        raise ValueError(f"no event labelled {target!r}")

    def at(self, value: float) -> tuple:
        """Events with the swept parameter set to ``value``."""
        if self.sweep is None:
            return self.events
        events = list(self.events)
        for t in self.sweep.targets:
            k = self._index(t)
            events[k] = replace(events[k], **{self.sweep.attribute: float(value)})
        return tuple(events)


@dataclass(frozen=True)
class RelaxationSpec:
    """Phenomenological relaxation; ``math.inf`` switches a channel off."""

    t1e: float = math.inf
    t2e: float = math.inf
    t2n: float = math.inf
    stretch_m: float = 1.0

    def __post_init__(self):
        for name in ("t1e", "t2e", "t2n"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.stretch_m <= 2:
            raise ValueError("stretch_m must lie in (0, 2]")


@dataclass(frozen=True)
class RabiDrive:
    frequency_mhz: float
    drivable: bool

    @property
    def pi_duration_ns(self) -> float:
        return 1e3 / (2 * self.frequency_mhz) if self.drivable else math.inf


def rabi_frequency(
    moment: float, b1_mT: float, constants: PhysicalConstants = DEFAULT_CONSTANTS
) -> RabiDrive:
    """Rabi frequency moment * (muB/h) * B1 in MHz for a moment in muB."""
    if b1_mT < 0:
        raise ValueError("B1 must be non-negative")
    omega = float(moment) * constants.mu_b_mhz_per_mt * b1_mT
    return RabiDrive(omega, omega > 0)


def rabi_for_pi(pi_duration_ns: float) -> float:
    """Rabi frequency (MHz) giving a pi rotation in ``pi_duration_ns``."""
    return 1e3 / (2.0 * pi_duration_ns)


def pair_rotation(amplitude: float, detuning: float, phase: float, duration_ns: float) -> np.ndarray:
    """2x2 propagator of a rectangular pulse in the rotating frame.

    Basis (lower, upper); field along (cos phase, sin phase) in the xy
    plane, ``detuning`` = carrier - transition frequency, both MHz.
    """
    t_us = duration_ns * 1e-3
    hx = amplitude * math.cos(phase)
    hy = amplitude * math.sin(phase)
    hz = detuning
    w = math.sqrt(hx * hx + hy * hy + hz * hz)
    if w == 0:
        return np.eye(2, dtype=complex)
    c = math.cos(math.pi * w * t_us)
    s = math.sin(math.pi * w * t_us) / w
    return np.array(
        [[c - 1j * s * hz, -1j * s * (hx - 1j * hy)], [-1j * s * (hx + 1j * hy), c + 1j * s * hz]]
    )


@dataclass
class Propagator:
    """Mutable simulation state for one run of a pulse sequence."""

    eig: EigenSystem
    temperature: float
    relaxation: RelaxationSpec | None = None
    constants: PhysicalConstants = DEFAULT_CONSTANTS
    rho: np.ndarray = field(init=False)
    rho_eq: np.ndarray = field(init=False)
    electron_clock: float = 0.0
    nuclear_clock: float = 0.0
    last_mw_pair: tuple | None = None

    def __post_init__(self):
        if self.eig.ms is None:
            raise ValueError("eigensystem must carry (M_S, M_I) labels")
        p = boltzmann_populations(self.eig.energies, self.temperature, self.constants)
        self.rho_eq = np.diag(p).astype(complex)
        self.rho = self.rho_eq.copy()
        ms, mi = self.eig.ms, self.eig.mi
        self._e_mask = ms[:, None] != ms[None, :]
        self._n_mask = mi[:, None] != mi[None, :]
        self._freq = np.abs(self.eig.energies[:, None] - self.eig.energies[None, :])

    def resolve(self, pulse: PulseEvent) -> tuple[int, int] | None:
        """Eigenstate pair driven by ``pulse`` (lower energy first)."""
        if pulse.pair is not None:
            a, b = pulse.pair
            return (a, b) if self.eig.energies[a] <= self.eig.energies[b] else (b, a)
        mask = self._e_mask if pulse.channel == "MW" else ~self._e_mask
        mask = np.triu(mask, 1)
        if not mask.any():
            raise OffResonanceError(f"no {pulse.channel} transitions in this level structure")
        detune = np.where(mask, np.abs(self._freq - pulse.carrier_frequency), np.inf)
        a, b = np.unravel_index(np.argmin(detune), detune.shape)
        if detune[a, b] > pulse.amplitude:
            if pulse.allow_off_resonant:
                return None
            raise OffResonanceError(
                f"{pulse.channel} pulse at {pulse.carrier_frequency:.6f} MHz is off resonance; nearest "
                f"transition ({a},{b}) at {self._freq[a, b]:.6f} MHz, Rabi bandwidth {pulse.amplitude:g} MHz"
            )
        return (int(a), int(b)) if self.eig.energies[a] <= self.eig.energies[b] else (int(b), int(a))

    def pulse(self, pulse: PulseEvent) -> None:
        pair = self.resolve(pulse)
        if pair is None:
            return
        a, b = pair
        f_ab = self.eig.energies[b] - self.eig.energies[a]
        carrier = f_ab if pulse.carrier_frequency is None else pulse.carrier_frequency
        u2 = pair_rotation(pulse.amplitude, carrier - f_ab, pulse.phase, pulse.duration)
        u = np.eye(len(self.rho), dtype=complex)
        idx = np.ix_([a, b], [a, b])
        u[idx] = u2
        self.rho = u @ self.rho @ u.conj().T
        if pulse.channel == "MW":
            self.last_mw_pair = pair

    def delay(self, delay: Delay) -> None:
        rel = self.relaxation
        d_us = delay.duration * 1e-3
        if rel is None or d_us == 0:
            return
        e_present = np.abs(self.rho[self._e_mask]).max(initial=0.0) > _PRESENCE_TOL
        n_present = np.abs(self.rho[self._n_mask]).max(initial=0.0) > _PRESENCE_TOL
        if math.isfinite(rel.t1e):
            s = math.exp(-d_us * 1e-6 / rel.t1e)
            self.rho = s * self.rho + (1.0 - s) * self.rho_eq
        m = rel.stretch_m
        if e_present:
            t0 = self.electron_clock
            if math.isfinite(rel.t2e):
                fe = math.exp(-(((t0 + d_us) / rel.t2e) ** m) + (t0 / rel.t2e) ** m)
                self.rho[self._e_mask] *= fe
            self.electron_clock = t0 + d_us
        if n_present:
            t0 = self.nuclear_clock
            if math.isfinite(rel.t2n):
                fn = math.exp(-(((t0 + d_us) / rel.t2n) ** m) + (t0 / rel.t2n) ** m)
                self.rho[self._n_mask] *= fn
            self.nuclear_clock = t0 + d_us

    def acquire(self, acq: Acquire) -> float:
        pair = acq.pair if acq.pair is not None else self.last_mw_pair
        if pair is None:
            raise ValueError("Acquire has no pair and no MW pulse preceded it")
        a, b = pair
        if self.eig.energies[a] > self.eig.energies[b]:
            a, b = b, a
        if acq.mode == "polarization":
            return float((self.rho[a, a] - self.rho[b, b]).real)
        if acq.mode == "magnitude":
            return float(abs(self.rho[a, b]))
        return float((1j * self.rho[a, b] * np.exp(-1j * acq.phase)).real)

    def apply(self, event: Event):
        if isinstance(event, PulseEvent):
            return self.pulse(event)
        if isinstance(event, Delay):
            return self.delay(event)
        if isinstance(event, Acquire):
            return self.acquire(event)
        raise TypeError(f"unknown event {event!r}")


def run_events(
    eig: EigenSystem,
    events: Sequence[Event],
    relaxation: RelaxationSpec | None,
    T: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    callback: Callable[[np.ndarray, Event], None] | None = None,
) -> float:
    """Run ``events`` from thermal equilibrium and return the acquired signal."""
    prop = Propagator(eig, T, relaxation, constants)
    signal = None
    for ev in events:
        out = prop.apply(ev)
        if isinstance(ev, Acquire):
            signal = out
        if callback is not None:
            callback(prop.rho, ev)
    if signal is None:
        raise ValueError("events contain no Acquire")
    return signal


@dataclass(frozen=True)
class SignalTrace:
    values: np.ndarray
    signal: np.ndarray
    parameter: str = ""

    def normalized(self, reference: float | None = None) -> "SignalTrace":
        ref = np.abs(self.signal).max() if reference is None else reference
        return SignalTrace(self.values, self.signal / ref, self.parameter)


def run_sequence(
    system: SpinSystem,
    field_mT,
    sequence: PulseSequence,
    relaxation: RelaxationSpec | None,
    T: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    eig: EigenSystem | None = None,
) -> SignalTrace:
    """Simulate ``sequence`` at every point of its sweep.

    The level structure is diagonalized once at ``field_mT``; each swept
    point starts from Boltzmann populations at temperature ``T``.
    """
    if eig is None:
        eig = diagonalize(system, field_mT, constants)
    if sequence.sweep is None:
        values = np.array([0.0])
        param = ""
    else:
        values = np.array(sequence.sweep.values)
        param = sequence.sweep.parameter
    signal = np.array([run_events(eig, sequence.at(v), relaxation, T, constants) for v in values])
    return SignalTrace(values, signal, param)


# -- standard sequences --------------------------------------------------------

def _mw(angle, amplitude, carrier, pair, label="", phase=0.0):
    return PulseEvent.rotation("MW", angle, amplitude, carrier, pair=pair, label=label, phase=phase)


def hahn_echo_sequence(tau_ns, mw_amplitude, carrier=None, pair=None, mode="magnitude") -> PulseSequence:
    """pi/2 - tau - pi - tau - echo, sweeping tau."""
    events = (
        _mw(math.pi / 2, mw_amplitude, carrier, pair),
        Delay(float(tau_ns[0]), label="tau1"),
        _mw(math.pi, mw_amplitude, carrier, pair),
        Delay(float(tau_ns[0]), label="tau2"),
        Acquire(mode=mode, pair=pair),
    )
    return PulseSequence(events, Sweep(("tau1", "tau2"), "duration_ns", tuple(tau_ns)))


def inversion_recovery_sequence(
    tau_var_ns, tau_e_ns, mw_amplitude, carrier=None, pair=None, mode="phased"
) -> PulseSequence:
    """pi - tau_var - pi/2 - tau_e - pi - tau_e - echo, sweeping tau_var."""
    events = (
        _mw(math.pi, mw_amplitude, carrier, pair),
        Delay(float(tau_var_ns[0]), label="tau_var"),
        _mw(math.pi / 2, mw_amplitude, carrier, pair),
        Delay(float(tau_e_ns)),
        _mw(math.pi, mw_amplitude, carrier, pair),
        Delay(float(tau_e_ns)),
        Acquire(mode=mode, pair=pair),
    )
    return PulseSequence(events, Sweep("tau_var", "duration_ns", tuple(tau_var_ns)))


def nutation_sequence(durations_ns, amplitude, carrier=None, pair=None, channel="MW") -> PulseSequence:
    """A single pulse of variable length followed by a polarization readout."""
    events = (
        PulseEvent(channel, carrier, float(durations_ns[0]), amplitude=amplitude, pair=pair, label="nutation"),
        Acquire(mode="polarization", pair=pair),
    )
    return PulseSequence(events, Sweep("nutation", "duration_ns", tuple(durations_ns)))


def davies_endor_sequence(
    rf_frequencies_mhz,
    mw_pair,
    mw_amplitude,
    rf_amplitude,
    tau_ns=1000.0,
    rf_duration_ns=None,
) -> PulseSequence:
    """pi_e - tau - pi_rf - tau - pi/2_e - tau - pi_e - tau - echo, sweeping the RF carrier."""
    rf_len = rabi_for_pi_duration(rf_amplitude) if rf_duration_ns is None else rf_duration_ns
    events = (
        _mw(math.pi, mw_amplitude, None, mw_pair),
        Delay(tau_ns),
        PulseEvent("RF", float(rf_frequencies_mhz[0]), rf_len, amplitude=rf_amplitude,
                   allow_off_resonant=True, label="rf"),
        Delay(tau_ns),
        _mw(math.pi / 2, mw_amplitude, None, mw_pair),
        Delay(tau_ns),
        _mw(math.pi, mw_amplitude, None, mw_pair),
        Delay(tau_ns),
        Acquire(mode="phased", pair=mw_pair),
    )
    return PulseSequence(events, Sweep("rf", "frequency_MHz", tuple(rf_frequencies_mhz)))


def nuclear_rabi_sequence(
    rf_durations_ns, mw_pair, rf_pair, mw_amplitude, rf_amplitude, tau_ns=1000.0
) -> PulseSequence:
    """Davies readout with a fixed-frequency RF pulse of variable length."""
    events = (
        _mw(math.pi, mw_amplitude, None, mw_pair),
        Delay(tau_ns),
        PulseEvent("RF", None, float(rf_durations_ns[0]), amplitude=rf_amplitude, pair=rf_pair, label="rf"),
        Delay(tau_ns),
        _mw(math.pi / 2, mw_amplitude, None, mw_pair),
        Delay(tau_ns),
        _mw(math.pi, mw_amplitude, None, mw_pair),
        Delay(tau_ns),
        Acquire(mode="phased", pair=mw_pair),
    )
    return PulseSequence(events, Sweep("rf", "duration_ns", tuple(rf_durations_ns)))


def nuclear_transfer_sequence(
    tau_n_ns,
    mw_pair,
    rf_pair,
    mw_amplitude,
    rf_amplitude,
    tau_e_ns=1000.0,
) -> PulseSequence:
    """Store an electron echo in a nuclear coherence for 2 tau_n and read it back.

    ``mw_pair`` = (a, b) is the EPR transition and ``rf_pair`` = (b, c) an
    NMR transition sharing level b. The coherence a-b is moved to b-c by
    pi_rf(b,c) then pi_e(a,b), refocused by a nuclear pi pulse halfway
    through storage, and returned by the mirror-image pulses before a
    final electron echo.
    """
    def pi_e():
        return _mw(math.pi, mw_amplitude, None, mw_pair)

    def pi_n():
        return PulseEvent.rotation("RF", math.pi, rf_amplitude, None, pair=rf_pair)

    events = (
        _mw(math.pi / 2, mw_amplitude, None, mw_pair),
        Delay(tau_e_ns),
        pi_e(),
        Delay(tau_e_ns),
        pi_n(),
        pi_e(),
        Delay(float(tau_n_ns[0]), label="tau_n1"),
        pi_n(),
        Delay(float(tau_n_ns[0]), label="tau_n2"),
        pi_e(),
        pi_n(),
        Delay(tau_e_ns),
        pi_e(),
        Delay(tau_e_ns),
        Acquire(mode="magnitude", pair=mw_pair),
    )
    return PulseSequence(events, Sweep(("tau_n1", "tau_n2"), "duration_ns", tuple(tau_n_ns)))


def rabi_for_pi_duration(amplitude: float) -> float:
    """Length (ns) of a pi pulse at Rabi frequency ``amplitude`` (MHz)."""
    return 1e3 / (2.0 * amplitude)


@dataclass(frozen=True)
class EndorSpectrum:
    rf_frequencies: np.ndarray
    signal: np.ndarray
    baseline: float

    @property
    def change(self) -> np.ndarray:
        return self.signal - self.baseline


def davies_endor(
    system: SpinSystem,
    field_mT,
    mw_transition,
    rf_sweep_grid,
    relaxation: RelaxationSpec | None,
    T: float,
    mw_amplitude: float = rabi_for_pi(52.0),
    rf_amplitude: float = rabi_for_pi(1060.0),
    tau_ns: float = 1000.0,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    eig: EigenSystem | None = None,
) -> EndorSpectrum:
    """Davies ENDOR spectrum: phased echo versus RF carrier.

    ``mw_transition`` is a :class:`~spinbench.spectra.Transition` or an
    index pair. The baseline is the same sequence with the RF pulse
    removed, i.e. the inverted echo.
    """
    if eig is None:
        eig = diagonalize(system, field_mT, constants)
    if hasattr(mw_transition, "lower_index"):
        pair = (mw_transition.lower_index, mw_transition.upper_index)
    else:
        pair = tuple(int(x) for x in mw_transition)
    n = len(eig)
    if len(pair) != 2 or pair[0] == pair[1] or not all(0 <= k < n for k in pair):
        raise ValueError(f"invalid MW transition {mw_transition!r}")
    if eig.ms[pair[0]] == eig.ms[pair[1]]:
        raise ValueError("MW transition must change M_S")
    seq = davies_endor_sequence(rf_sweep_grid, pair, mw_amplitude, rf_amplitude, tau_ns)
    trace = run_sequence(system, field_mT, seq, relaxation, T, constants, eig=eig)
    no_rf = tuple(ev for ev in seq.events if getattr(ev, "label", "") != "rf")
    baseline = run_events(eig, no_rf, relaxation, T, constants)
    return EndorSpectrum(np.asarray(trace.values), trace.signal, baseline)


# -- sequence files ------------------------------------------------------------

_ANGLES = {"pi": math.pi, "pi/2": math.pi / 2, "pi/4": math.pi / 4, "2pi": 2 * math.pi, "3pi/2": 1.5 * math.pi}


def _parse_angle(value) -> float:
    if isinstance(value, str):
        key = value.strip().replace(" ", "")
        if key not in _ANGLES:
            raise ValueError(f"unknown angle hint {value!r}")
        return _ANGLES[key]
    return float(value)


def _event_from_dict(d: dict) -> Event:
    kind = d.get("type", "pulse").lower()
    label = d.get("label", "")
    if kind == "delay":
        return Delay(float(d["duration_ns"]), label=label)
    if kind == "acquire":
        pair = tuple(d["pair"]) if "pair" in d else None
        return Acquire(mode=d.get("mode", "magnitude"), phase=float(d.get("phase_rad", 0.0)), pair=pair, label=label)
    if kind != "pulse":
        raise ValueError(f"unknown event type {kind!r}")
    channel = d.get("channel", "MW")
    carrier = d.get("frequency_MHz")
    carrier = None if carrier is None else float(carrier)
    pair = tuple(d["pair"]) if "pair" in d else None
    phase = float(d.get("phase_rad", 0.0))
    amplitude = d.get("amplitude_MHz")
    duration = d.get("duration_ns")
    common = dict(pair=pair, phase=phase, label=label, allow_off_resonant=bool(d.get("allow_off_resonant", False)))
    if "angle" in d:
        angle = _parse_angle(d["angle"])
        if amplitude is None and duration is None:
            raise ValueError("angle hint needs amplitude_MHz or duration_ns")
        if amplitude is None:
            amplitude = 1e3 * angle / (2 * math.pi * float(duration))
        else:
            duration = 1e3 * angle / (2 * math.pi * float(amplitude))
    if amplitude is None or duration is None:
        raise ValueError("pulse needs amplitude_MHz and duration_ns (or an angle hint)")
    return PulseEvent(channel, carrier, float(duration), amplitude=float(amplitude), **common)


def sequence_from_dict(doc: dict) -> PulseSequence:
    events = tuple(_event_from_dict(e) for e in doc["events"])
    sweep = None
    sw = doc.get("sweep")
    if sw:
        if "values" in sw:
            values = sw["values"]
        else:
            values = np.linspace(float(sw["start"]), float(sw["stop"]), int(sw["num"])).tolist()
        targets = sw.get("targets", sw.get("target"))
        sweep = Sweep(targets if isinstance(targets, list) else (targets,), sw["parameter"], values)
    return PulseSequence(events, sweep)


def load_sequence(path) -> PulseSequence:
    with open(path) as fh:
        return sequence_from_dict(json.load(fh))
