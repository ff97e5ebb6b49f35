"""Estimators and closed-form references for trajectory statistics.

Covers mean-square displacement, correlation functions, power spectral
densities (linear, thermally broadened nonlinear, and the asymmetric
low-occupation spectrum), Lorentzian calibration fits, steady-state and
relaxation energy distributions, modulated effective temperatures, and
squeezing quadratures.

Spectral convention: two-sided S_qq(W) on an angular frequency grid,
normalized so that the integral over all W equals <q^2>.  For the
harmonic oscillator this is

    S_qq(W) = (gamma k_B T / pi m) / [(W^2 - W0^2)^2 + gamma^2 W^2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.integrate import quad
from scipy.optimize import least_squares
from scipy.special import erfcx, i0e
from scipy.stats import ncx2, truncnorm

from .constants import hbar, k_B
from .langevin import Trajectory


class FitError(RuntimeError):
    """Raised when a spectral fit does not converge."""


class AboveThresholdError(ValueError):
    """Raised when a parametric drive admits no stationary state."""


# ---------------------------------------------------------------------------
# mean-square displacement


def msd(traj: Trajectory, lags: np.ndarray) -> np.ndarray:
    """Ensemble- and time-averaged mean-square displacement at integer lags."""
    q = np.atleast_2d(traj.q)
    out = np.empty(len(lags))
    for i, lag in enumerate(lags):
        if lag == 0:
            out[i] = 0.0
        else:
            d = q[:, lag:] - q[:, :-lag]
            out[i] = np.mean(d**2)
    return out


def msd_free(t, gamma: float, temperature: float, mass: float):
    """Free-particle MSD 2 k_B T / (m gamma^2) [gamma t - 1 + exp(-gamma t)].

    Ballistic (k_B T / m) t^2 at short times, diffusive 2 D t with
    D = k_B T / (m gamma) at long times.
    """
    t = np.asarray(t, dtype=float)
    gt = gamma * t
    # series for small gamma t keeps precision in the ballistic regime
    small = gt < 1e-4
    bracket = np.where(small, gt**2 / 2.0 - gt**3 / 6.0,
                       gt - 1.0 + np.exp(-np.minimum(gt, 700.0)))
    return 2.0 * k_B * temperature / (mass * gamma**2) * bracket


def _damped_envelope(t, omega0: float, gamma: float):
    """e^{-gamma t/2}(cos wt + (gamma/2w) sin wt) for any damping regime.

    The underdamped form continues analytically to the overdamped case
    (trigonometric -> hyperbolic) and to critical damping (w -> 0).
    """
    t = np.asarray(t, dtype=float)
    disc = omega0**2 - gamma**2 / 4.0
    decay = np.exp(-0.5 * gamma * t)
    if disc > 0:
        w = math.sqrt(disc)
        return decay * (np.cos(w * t) + gamma / (2.0 * w) * np.sin(w * t)), w
    if disc < 0:
        w = math.sqrt(-disc)
        return decay * (np.cosh(w * t) + gamma / (2.0 * w) * np.sinh(w * t)), w
    return decay * (1.0 + 0.5 * gamma * t), 0.0


def msd_harmonic(t, omega0: float, gamma: float, temperature: float,
                 mass: float):
    """Position MSD of the trapped particle, valid in all damping regimes."""
    env, _ = _damped_envelope(t, omega0, gamma)
    return 2.0 * k_B * temperature / (mass * omega0**2) * (1.0 - env)


# ---------------------------------------------------------------------------
# correlation functions


def _fft_corr(x: np.ndarray, y: np.ndarray, max_lag: int) -> np.ndarray:
    """Unbiased estimator of <x(t) y(t + lag)> averaged over the ensemble."""
    n = x.shape[1]
    nfft = next_fast_len(2 * n)
    fx = rfft(x, nfft, axis=1)
    fy = rfft(y, nfft, axis=1)
    r = irfft(np.conj(fx) * fy, nfft, axis=1)[:, :max_lag + 1]
    counts = n - np.arange(max_lag + 1)
    return (r / counts).mean(axis=0)


def autocorrelations(traj: Trajectory, max_lag: int):
    """Estimated C_qq, C_vv, C_qv at lags 0..max_lag.

    Returns (lag times, C_qq, C_vv, C_qv) with C_qv = <q(t) v(t+lag)>.
    """
    q = np.atleast_2d(traj.q)
    v = np.atleast_2d(traj.velocity)
    lags = np.arange(max_lag + 1) * (traj.time[1] - traj.time[0])
    return (lags, _fft_corr(q, q, max_lag), _fft_corr(v, v, max_lag),
            _fft_corr(q, v, max_lag))


def autocorrelation_qq(t, omega0, gamma, temperature, mass):
    """C_qq(t) = k_B T / (m W0^2) - MSD(t)/2."""
    return (k_B * temperature / (mass * omega0**2)
            - 0.5 * msd_harmonic(t, omega0, gamma, temperature, mass))


def autocorrelation_vv(t, omega0, gamma, temperature, mass):
    """C_vv(t) = (k_B T/m) e^{-gamma t/2}(cos wt - (gamma/2w) sin wt)."""
    t = np.asarray(t, dtype=float)
    disc = omega0**2 - gamma**2 / 4.0
    decay = np.exp(-0.5 * gamma * t)
    if disc > 0:
        w = math.sqrt(disc)
        body = np.cos(w * t) - gamma / (2.0 * w) * np.sin(w * t)
    elif disc < 0:
        w = math.sqrt(-disc)
        body = np.cosh(w * t) - gamma / (2.0 * w) * np.sinh(w * t)
    else:
        body = 1.0 - 0.5 * gamma * t
    return k_B * temperature / mass * decay * body


def autocorrelation_qv(t, omega0, gamma, temperature, mass):
    """C_qv(t) = <q(0) v(t)> = -(k_B T / m w) e^{-gamma t/2} sin(wt).

    The time derivative of C_qq; the mirrored cross correlation
    <v(0) q(t)> carries the opposite sign.
    """
    t = np.asarray(t, dtype=float)
    disc = omega0**2 - gamma**2 / 4.0
    decay = np.exp(-0.5 * gamma * t)
    if disc > 0:
        w = math.sqrt(disc)
        return -k_B * temperature / (mass * w) * decay * np.sin(w * t)
    if disc < 0:
        w = math.sqrt(-disc)
        return -k_B * temperature / (mass * w) * decay * np.sinh(w * t)
    return -k_B * temperature / mass * decay * t


# ---------------------------------------------------------------------------
# power spectral densities


@dataclass
class SpectralDensity:
    """Two-sided spectrum on an angular frequency grid (values in m^2 s)."""

    omega: np.ndarray
    values: np.ndarray
    n_segments: int
    window: str
    dt: float

    def integral(self) -> float:
        """Total power, to compare against <q^2>."""
        return float(np.trapezoid(self.values, self.omega))


def psd(traj: Trajectory, n_segments: int = 8,
        window: str = "hann") -> SpectralDensity:
    """Segment-averaged windowed periodogram (Welch, 50% overlap).

    Averages over the ensemble as well as over segments, and normalizes
    to the two-sided angular-frequency convention so the spectrum
    integrates to <q^2>.
    """
    q = np.atleast_2d(traj.q)
    dt = traj.time[1] - traj.time[0]
    n = q.shape[1]
    seg = max(8, int(2 * n / (n_segments + 1)))
    step = seg // 2
    if window == "hann":
        win = np.hanning(seg)
    elif window == "boxcar":
        win = np.ones(seg)
    else:
        raise ValueError("window must be 'hann' or 'boxcar'")
    norm = (win**2).sum() / dt
    acc = None
    count = 0
    for start in range(0, n - seg + 1, step):
        block = q[:, start:start + seg] * win
        spec = np.abs(np.fft.fft(block, axis=1)) ** 2 / norm
        acc = spec.sum(axis=0) if acc is None else acc + spec.sum(axis=0)
        count += q.shape[0]
    if acc is None:
        raise ValueError("trajectory too short for the requested segmentation")
    power = np.fft.fftshift(acc / count)
    freq = np.fft.fftshift(np.fft.fftfreq(seg, d=dt))
    # per-Hz two-sided density -> per-(rad/s) density
    return SpectralDensity(2.0 * math.pi * freq, power / (2.0 * math.pi),
                           count, window, dt)


def psd_analytic(omega, omega0: float, gamma: float, temperature: float,
                 mass: float):
    """Harmonic-oscillator spectrum (gamma k_B T / pi m) / [(W^2-W0^2)^2 + g^2 W^2]."""
    omega = np.asarray(omega, dtype=float)
    return (gamma * k_B * temperature / (math.pi * mass)
            / ((omega**2 - omega0**2) ** 2 + gamma**2 * omega**2))


def duffing_shifted_frequency(energy, omega0: float, xi: float, mass: float):
    """Amplitude-dependent resonance W0 + 3 xi E / (4 m W0)."""
    return omega0 + 3.0 * xi * np.asarray(energy) / (4.0 * mass * omega0)


def nonlinearity_parameter(xi: float, omega0: float, gamma: float,
                           temperature: float, mass: float) -> float:
    """R = 3 xi Q k_B T / (4 W^2 m): thermal frequency shift over linewidth."""
    q_factor = omega0 / gamma
    return 3.0 * abs(xi) * q_factor * k_B * temperature / (4.0 * omega0**2 * mass)


def psd_nonlinear(omega, omega0: float, gamma: float, temperature: float,
                  xi: float, mass: float, rtol: float = 1e-6):
    """Thermally broadened Duffing spectrum.

    Averages the energy-shifted Lorentzian kernel

        S_L(W, E) = E gamma / (pi m) / [(W^2 - What(E)^2)^2 + g^2 W^2],
        What(E) = W0 + 3 xi E / (4 m W0),

    over the Gibbs distribution rho(E) = exp(-E/k_B T)/k_B T by adaptive
    quadrature.  Reduces pointwise to `psd_analytic` as xi -> 0; for
    xi < 0 the line shape skews below W0.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    kt = k_B * temperature
    # energy (in k_B T) resonant with w, and the Lorentzian width in the
    # same units; both guide the quadrature to the narrow ridge
    slope = 3.0 * xi * kt / (4.0 * mass * omega0)
    out = np.empty_like(omega)
    for i, w in enumerate(omega):
        def integrand(u):
            e = u * kt
            what = omega0 + 3.0 * xi * e / (4.0 * mass * omega0)
            lor = 1.0 / ((w**2 - what**2) ** 2 + gamma**2 * w**2)
            return u * np.exp(-u) * lor

        pts = None
        if slope != 0.0:
            u_res = (w - omega0) / slope
            width = abs(gamma / (2.0 * slope))
            cand = [u_res + k * width for k in (-8.0, -2.0, 0.0, 2.0, 8.0)]
            pts = sorted(u for u in cand if 0.0 < u < 50.0) or None
        val, _ = quad(integrand, 0.0, 50.0, epsrel=rtol, limit=500,
                      points=pts)
        out[i] = gamma * kt / (math.pi * mass) * val
    return out if out.size > 1 else float(out[0])


def psd_quantum(omega, omega0: float, gamma_eff: float, t_cm: float,
                mass: float, form: str = "im"):
    """Asymmetric spectrum when k_B T_CM is comparable to hbar W0.

    Two printed forms are evaluated separately rather than asserted
    equal: "im" uses (hbar/pi) Im chi / (1 - e^{-hbar W / k_B T}) and
    "abs" uses hbar W m gamma / pi |chi|^2 over the same thermal factor.
    The sideband ratio S(+W0)/S(-W0) = exp(hbar W0 / k_B T_CM) holds for
    both.  `gamma_eff` and `t_cm` are taken as explicit inputs.
    """
    omega = np.asarray(omega, dtype=float)
    denom_chi = (omega0**2 - omega**2) ** 2 + gamma_eff**2 * omega**2
    x = hbar * omega / (k_B * t_cm)
    thermal = -np.expm1(-x)
    if form == "im":
        im_chi = gamma_eff * omega / (mass * denom_chi)
        return hbar / math.pi * im_chi / thermal
    if form == "abs":
        abs_chi2 = 1.0 / (mass**2 * denom_chi)
        return hbar * omega * mass * gamma_eff / math.pi * abs_chi2 / thermal
    raise ValueError("form must be 'im' or 'abs'")


@dataclass
class LorentzianFit:
    """Calibration parameters recovered from a measured spectrum."""

    omega0: float
    gamma: float
    t_cm: float
    covariance: np.ndarray


def lorentzian_fit(spectrum: SpectralDensity, mass: float,
                   guess: tuple | None = None,
                   band: tuple | None = None) -> LorentzianFit:
    """Least-squares fit of the harmonic spectrum to (W0, gamma, T).

    The residual is taken in log space, which weights each bin by its
    relative error; Welch bins have constant relative noise.  By default
    the fit uses only frequencies below a quarter of the Nyquist rate:
    the spectrum of the sampled process rolls off relative to the
    continuous-time line near Nyquist, and those bins would otherwise
    dominate the log-space cost.  Pass `band=(lo, hi)` to override.
    """
    if band is None:
        band = (0.0, 0.25 * float(spectrum.omega.max()))
    pos = (spectrum.omega > band[0]) & (spectrum.omega <= band[1])
    w = spectrum.omega[pos]
    s = spectrum.values[pos]
    keep = s > 0
    w, s = w[keep], s[keep]
    if guess is None:
        w0_g = w[np.argmax(s)]
        if w0_g < 3.0 * (w[1] - w[0]):
            w0_g = w[np.argmax(s * w**2)]
        area = np.trapezoid(s, w)
        g_g = max(area / (math.pi * s.max() * 1.0), w[1] - w[0])
        t_g = 2.0 * area * mass * w0_g**2 / k_B
        guess = (w0_g, g_g, t_g)

    log_s = np.log(s)

    def resid(p):
        w0, gam, temp = np.abs(p)
        model = psd_analytic(w, w0, gam, temp, mass)
        return np.log(model) - log_s

    sol = least_squares(resid, guess, method="lm", max_nfev=20000)
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise FitError(f"spectrum fit failed: {sol.message}; "
                       f"residual norm {np.linalg.norm(sol.fun):.3g}")
    jtj = sol.jac.T @ sol.jac
    dof = max(1, len(sol.fun) - 3)
    cov = np.linalg.pinv(jtj) * 2.0 * sol.cost / dof
    w0, gam, temp = np.abs(sol.x)
    return LorentzianFit(w0, gam, temp, cov)


# ---------------------------------------------------------------------------
# modulated steady states


def parametric_threshold(q_factor: float, omega_mod: float,
                         omega0: float) -> float:
    """Instability depth (2/Q) sqrt(1 + Q^2 (2 - w_mod/W0)^2)."""
    detune = 2.0 - omega_mod / omega0
    return 2.0 / q_factor * math.sqrt(1.0 + q_factor**2 * detune**2)


def modulation_strength(eps0: float, phi: float, omega0: float, omega: float,
                        gamma: float) -> float:
    """s = eps0 W0^2 sin(2 phi) / (gamma W), the linear bias on the energy.

    At resonance (W = 2 W0) this is eps0 Q sin(2 phi) / 2, which places
    the heating instability (s = -1 at phi = -pi/4) at eps0 = 2/Q, in
    agreement with the period-averaged power balance of the phase-locked
    drive eps(t) = eps0 cos(2 theta - 2 phi).
    """
    return eps0 * omega0**2 * math.sin(2.0 * phi) / (gamma * omega)


def effective_temperature_modulated(eps0: float, phi: float, omega0: float,
                                    omega: float, gamma: float,
                                    temperature: float) -> tuple[float, float]:
    """Effective temperature T' = T (1 + s)^{-1} and relaxation rate.

    s > 0 (phi in (0, pi/2)) cools, s < 0 heats; s <= -1 means the drive
    outruns dissipation and no stationary state exists, which coincides
    with the threshold eps0 > 2/Q at resonance.  The thermalization rate
    toward T' is gamma' = gamma (T/T' - 1) = gamma s.
    """
    s = modulation_strength(eps0, phi, omega0, omega, gamma)
    if 1.0 + s <= 0.0:
        raise AboveThresholdError(
            f"modulation bias s = {s:.3f} <= -1: effective temperature diverges")
    t_eff = temperature / (1.0 + s)
    return t_eff, gamma * s


@dataclass
class SteadyStateDistribution:
    """Energy law P_E(E) = Z^{-1} exp(-beta [(1+s) E + c E^2]).

    `linear` is (1+s) with s the modulation bias; `quadratic` is the
    feedback coefficient c = eta W0 / (4 m gamma W^2) in 1/J.
    """

    temperature: float
    linear: float
    quadratic: float
    omega0: float
    mass: float

    def __post_init__(self):
        if self.linear <= 0 and self.quadratic <= 0:
            raise AboveThresholdError("energy distribution not normalizable")

    @property
    def beta(self) -> float:
        return 1.0 / (k_B * self.temperature)

    @property
    def normalization(self) -> float:
        """Z = (1/2) sqrt(pi / (beta c)) erfcx(beta(1+s) / (2 sqrt(beta c)))."""
        a = self.beta * self.linear
        b = self.beta * self.quadratic
        if b == 0:
            return 1.0 / a
        return 0.5 * math.sqrt(math.pi / b) * erfcx(a / (2.0 * math.sqrt(b)))

    def pdf(self, energy):
        e = np.asarray(energy, dtype=float)
        expo = -self.beta * (self.linear * e + self.quadratic * e**2)
        out = np.where(e >= 0, np.exp(expo) / self.normalization, 0.0)
        return out

    def log_pdf(self, energy):
        e = np.asarray(energy, dtype=float)
        return (-self.beta * (self.linear * e + self.quadratic * e**2)
                - math.log(self.normalization))

    def mean(self) -> float:
        val, _ = quad(lambda e: e * self.pdf(e), 0.0, self._e_max())
        return val

    def _e_max(self) -> float:
        scale = 1.0 / (self.beta * self.linear) if self.linear > 0 else \
            1.0 / math.sqrt(self.beta * self.quadratic)
        return 60.0 * scale

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Exact draws: a truncated Gaussian in E (exponential when c = 0)."""
        a = self.beta * self.linear
        b = self.beta * self.quadratic
        if b == 0:
            return rng.exponential(1.0 / a, size=n)
        loc = -a / (2.0 * b)
        scale = 1.0 / math.sqrt(2.0 * b)
        return truncnorm.rvs(-loc / scale, np.inf, loc=loc, scale=scale,
                             size=n, random_state=rng)

    def sample_phase_space(self, n: int, rng: np.random.Generator):
        """(q, p) draws: energy from `sample`, phase uniform on the orbit."""
        e = self.sample(n, rng)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
        q = np.sqrt(2.0 * e / (self.mass * self.omega0**2)) * np.cos(theta)
        p = -np.sqrt(2.0 * self.mass * e) * np.sin(theta)
        return q, p

    def phase_space_density(self, q, p):
        """P_qp(q, p) = (W0 / 2 pi) P_E(E(q, p))."""
        e = (np.asarray(p) ** 2 / (2.0 * self.mass)
             + 0.5 * self.mass * self.omega0**2 * np.asarray(q) ** 2)
        return self.omega0 / (2.0 * math.pi) * self.pdf(e)


def steady_state_distribution(temperature: float, gamma: float, omega0: float,
                              mass: float, eps0: float = 0.0, phi: float = 0.0,
                              eta: float = 0.0,
                              omega: float | None = None) -> SteadyStateDistribution:
    """Energy distribution under parametric modulation and feedback.

    With eps0 = eta = 0 this is the Gibbs law with mean k_B T; feedback
    adds the quadratic term c E^2 with c = eta W0 / (4 m gamma W^2).
    """
    w = omega if omega is not None else omega0
    s = modulation_strength(eps0, phi, omega0, w, gamma) if eps0 else 0.0
    c = eta * omega0 / (4.0 * mass * gamma * w**2)
    return SteadyStateDistribution(temperature, 1.0 + s, c, omega0, mass)


def h_function(x):
    """h(x) = exp(x^2) erfc(x), evaluated stably as erfcx."""
    return erfcx(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# relaxation


def relaxation_density(energy, e0: float, t: float, gamma: float,
                       temperature: float):
    """Transition density of the energy during free relaxation.

    P(E, t | E0) = c_t exp[-c_t (E + E0 e^{-gt})] I0(2 c_t sqrt(E E0 e^{-gt}))
    with c_t = beta / (1 - e^{-gamma t}), evaluated in log space so large
    Bessel arguments cannot overflow.  The t -> infinity limit is the
    exponential law beta e^{-beta E} for any E0.
    """
    e = np.asarray(energy, dtype=float)
    beta = 1.0 / (k_B * temperature)
    decay = math.exp(-gamma * t)
    c_t = beta / (1.0 - decay)
    arg = 2.0 * c_t * np.sqrt(np.maximum(e, 0.0) * e0 * decay)
    # log I0(x) = log(i0e(x)) + x
    log_p = (math.log(c_t) - c_t * (e + e0 * decay)
             + np.log(i0e(arg)) + arg)
    return np.where(e >= 0, np.exp(log_p), 0.0)


def relaxation_cdf(energy, e0: float, t: float, gamma: float,
                   temperature: float):
    """CDF of the relaxation density via the noncentral chi-squared law.

    2 c_t E follows a noncentral chi-squared with 2 degrees of freedom
    and noncentrality 2 c_t E0 e^{-gamma t}.
    """
    beta = 1.0 / (k_B * temperature)
    decay = math.exp(-gamma * t)
    c_t = beta / (1.0 - decay)
    return ncx2.cdf(2.0 * c_t * np.asarray(energy), 2, 2.0 * c_t * e0 * decay)


def relaxation_temperature(t, t_init: float, t_final: float, gamma: float):
    """T(t) = T_inf + (T_init - T_inf) e^{-gamma t}."""
    return t_final + (t_init - t_final) * np.exp(-gamma * np.asarray(t))


# ---------------------------------------------------------------------------
# squeezing


@dataclass
class SqueezeResult:
    """Quadrature statistics right after a frequency-quench pulse.

    Variance ratios are relative to the thermal values of the base trap
    (k_B T / m W^2 for position, m k_B T for momentum).  `r` is the
    squeezing parameter (1/2) ln(W / W_s).
    """

    var_q_ratio: float
    var_p_ratio: float
    covariance_qp: float
    r: float
    predicted_q_ratio: float
    predicted_p_ratio: float
    predicted_covariance: float


def squeeze_prediction(omega: float, omega_s: float, tau: float,
                       temperature: float, mass: float):
    """Analytic quadrature statistics after a pulse at W_s of length tau.

    Propagating the thermal Gaussian through the pulse gives

        var q / var_th = cos^2 + (W/W_s)^2 sin^2,
        var p / var_th = cos^2 + (W_s/W)^2 sin^2,
        cov(q, p) = sin cos (k_B T / W_s)(1 - W_s^2 / W^2),

    with the trigonometric functions at W_s tau.  At a quarter period the
    ratios are ((W/W_s)^2, (W_s/W)^2) = (e^{4r}, e^{-4r}) and the
    covariance vanishes.
    """
    c, s = math.cos(omega_s * tau), math.sin(omega_s * tau)
    var_q = c**2 + (omega / omega_s) ** 2 * s**2
    var_p = c**2 + (omega_s / omega) ** 2 * s**2
    cov = s * c * k_B * temperature / omega_s * (1.0 - omega_s**2 / omega**2)
    return var_q, var_p, cov


def squeeze_quadratures(q: np.ndarray, p: np.ndarray, omega: float,
                        omega_s: float, tau: float, temperature: float,
                        mass: float) -> SqueezeResult:
    """Measured and predicted quadrature variances after a quench pulse.

    `q`, `p` are ensemble samples taken immediately after the pulse.
    """
    var_q_th = k_B * temperature / (mass * omega**2)
    var_p_th = mass * k_B * temperature
    pred_q, pred_p, pred_cov = squeeze_prediction(omega, omega_s, tau,
                                                  temperature, mass)
    r = 0.5 * math.log(omega / omega_s)
    return SqueezeResult(float(np.var(q) / var_q_th),
                         float(np.var(p) / var_p_th),
                         float(np.mean(q * p) - np.mean(q) * np.mean(p)),
                         r, pred_q, pred_p, pred_cov)
