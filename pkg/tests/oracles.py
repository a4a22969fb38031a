"""Independent reference implementations used only by the tests.

Nothing here imports the package's numeric code paths; each oracle is a
direct, loop-level transcription of the textbook definition.
"""

import math

import numpy as np

# Daubechies 4-vanishing-moment (8-tap) scaling filter, sum = sqrt(2)
DB4_SCALING = np.array([
    0.23037781330885523, 0.7148465705525415, 0.6308807679295904, -0.02798376941698385,
    -0.18703481171888114, 0.030841381835986965, 0.032883011666982945, -0.010597401784997278,
])


def qmf_bank(h=DB4_SCALING):
    rec_lo = h
    dec_lo = h[::-1]
    rec_hi = np.array([(-1) ** k * dec_lo[k] for k in range(len(h))])
    dec_hi = rec_hi[::-1]
    return dec_lo, dec_hi, rec_lo, rec_hi


def _sym_extend(x, m):
    # half-sample symmetric: x[m-1..0] x x[-1..-m]
    return np.concatenate([x[:m][::-1], x, x[::-1][:m]])


def mallat_analysis(x, dec_lo, dec_hi):
    L = len(dec_lo)
    ext = _sym_extend(np.asarray(x, float), L - 1)
    a = np.convolve(ext, dec_lo, mode="valid")[1::2]
    d = np.convolve(ext, dec_hi, mode="valid")[1::2]
    return a, d


def mallat_synthesis(a, d, rec_lo, rec_hi):
    L = len(rec_lo)
    n = len(a) if a is not None else len(d)
    y = np.zeros(2 * n + L - 1)
    for coef, filt in ((a, rec_lo), (d, rec_hi)):
        if coef is None:
            continue
        up = np.zeros(2 * n)
        up[::2] = coef
        y += np.convolve(up, filt, mode="full")
    return y[L - 2: L - 2 + 2 * n - L + 2]


def mallat_subbands(x, levels=4):
    """{'A1'..'A4','D1'..'D4'} sub-band reconstructions at the input length."""
    dec_lo, dec_hi, rec_lo, rec_hi = qmf_bank()
    lengths = [len(x)]
    approx, detail = [], []
    a = np.asarray(x, float)
    for _ in range(levels):
        a, d = mallat_analysis(a, dec_lo, dec_hi)
        approx.append(a)
        detail.append(d)
        lengths.append(len(a))
    out = {}
    for k in range(1, levels + 1):
        for name, coef, is_d in ((f"A{k}", approx[k - 1], False), (f"D{k}", detail[k - 1], True)):
            y = mallat_synthesis(None if is_d else coef, coef if is_d else None, rec_lo, rec_hi)
            y = y[:lengths[k - 1]]
            for j in range(k - 1, 0, -1):
                y = mallat_synthesis(y, None, rec_lo, rec_hi)[:lengths[j - 1]]
            out[name] = y
    return out


def lstsq_smooth_interior(x, frame, order):
    """Least-squares polynomial fit per centred window, evaluated at the centre."""
    half = frame // 2
    out = np.full(len(x), np.nan)
    t = np.arange(-half, half + 1, dtype=float)
    design = np.vander(t, order + 1, increasing=True)
    for i in range(half, len(x) - half):
        coef, *_ = np.linalg.lstsq(design, x[i - half:i + half + 1], rcond=None)
        out[i] = coef[0]
    return out


def dft_direct(x):
    n = len(x)
    return [sum(x[j] * complex(math.cos(-2 * math.pi * k * j / n), math.sin(-2 * math.pi * k * j / n))
                for j in range(n)) for k in range(n // 2 + 1)]


def time_features_loop(x):
    x = [float(v) for v in x]
    n = len(x)
    eps = 1e-12

    def div(a, b):
        return a / b if abs(b) >= eps else 0.0

    mean = sum(x) / n
    m2 = sum((v - mean) ** 2 for v in x) / n
    std = math.sqrt(m2)
    rms = math.sqrt(sum(v * v for v in x) / n)
    peak = max(abs(v) for v in x)
    ptp = max(x) - min(x)
    skew = sum(div(v - mean, std) ** 3 for v in x) / n
    kurt = sum(div(v - mean, std) ** 4 for v in x) / n
    mean_abs = sum(abs(v) for v in x) / n
    clear_den = (sum(math.sqrt(abs(v)) for v in x) / n) ** 2
    zc = sum(1 for a, b in zip(x, x[1:]) if a * b < 0) / (n - 1)
    if ptp >= eps:
        counts = [0] * 16
        lo = min(x)
        for v in x:
            counts[min(int(math.floor(div((v - lo) * 16, ptp))), 15)] += 1
        ent = -sum(c / n * math.log(c / n) for c in counts if c)
    else:
        ent = 0.0
    return {
        "mean": mean, "std": std, "rms": rms, "peak": peak, "peak_to_peak": ptp,
        "skewness": skew, "kurtosis": kurt, "crest_factor": div(peak, rms),
        "shape_factor": div(rms, mean_abs), "impulse_factor": div(peak, mean_abs),
        "clearance_factor": div(peak, clear_den), "energy": sum(v * v for v in x),
        "zero_crossing_rate": zc, "hist_entropy": ent,
    }


def freq_features_loop(freqs, mags, n_samples, sample_rate):
    eps = 1e-12
    f = [float(v) for v in freqs]
    m = [float(v) for v in mags]
    nb = len(m)

    def div(a, b):
        return a / b if abs(b) >= eps else 0.0

    sm = sum(m)
    q = [v * v for v in m]
    sq = sum(q)
    mean_mag = sm / nb
    std_mag = math.sqrt(sum((v - mean_mag) ** 2 for v in m) / nb)
    peak = max(m)
    peak_f = f[m.index(peak)]
    cen = div(sum(a * b for a, b in zip(f, m)), sm)
    mean_f = div(sum(a * b for a, b in zip(f, q)), sq)
    rms_f = math.sqrt(div(sum(a * a * b for a, b in zip(f, m)), sm))
    var = div(sum((a - cen) ** 2 * b for a, b in zip(f, m)), sm)
    sd = math.sqrt(var)
    skew = div(div(sum((a - cen) ** 3 * b for a, b in zip(f, m)), sm), sd ** 3)
    kurt = div(div(sum((a - cen) ** 4 * b for a, b in zip(f, m)), sm), sd ** 4)
    ent = 0.0
    median = 0.0
    if sq >= eps:
        ps = [v / sq for v in q]
        ent = -sum(p * math.log(p) for p in ps if p > 0)
        acc = 0.0
        for fk, p in zip(f, ps):
            acc += p
            if acc >= 0.5:
                median = fk
                break
    # Parseval-normalised energy from one-sided magnitudes
    energy = 0.0
    for k, v in enumerate(m):
        edge = k == 0 or (n_samples % 2 == 0 and k == nb - 1)
        energy += n_samples * v * v * (1.0 if edge else 0.5)
    upper = div(sum(b for a, b in zip(f, q) if a >= sample_rate / 4), sq)
    return {
        "mean_magnitude": mean_mag, "magnitude_std": std_mag, "peak_magnitude": peak,
        "peak_frequency": peak_f, "frequency_centroid": cen, "mean_frequency": mean_f,
        "rms_frequency": rms_f, "frequency_variance": var, "spectral_skewness": skew,
        "spectral_kurtosis": kurt, "spectral_crest_factor": div(peak, mean_mag),
        "spectral_entropy": ent, "median_frequency": median, "spectral_energy": energy,
        "spectral_shape_factor": div(math.sqrt(sq / nb), mean_mag),
        "upper_band_energy_ratio": upper,
    }


def t_score_loop(a, b):
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((v - ma) ** 2 for v in a) / (na - 1)
    vb = sum((v - mb) ** 2 for v in b) / (nb - 1)
    sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
    if sp2 < 1e-24:
        return 0.0
    return (ma - mb) / math.sqrt(sp2 * (1 / na + 1 / nb))


def separable_blobs_2d(rng, n, gap=0.1):
    """Two clusters in the unit square, split by a line through the origin with a
    margin of ``gap`` on each side; both classes always present."""
    while True:
        d = rng.standard_normal(2)
        d /= np.linalg.norm(d)
        y = np.where(np.arange(n) % 2, 1.0, -1.0)
        x = rng.standard_normal((n, 2)) * 0.15 + np.outer(y, d) * 0.5
        keep = (y * (x @ d) > gap) & np.all(np.abs(x) <= 1, axis=1)
        if len(set(y[keep])) == 2:
            return x[keep], y[keep]


def brute_force_t_order(values, labels):
    """Per-column t scores (Slip minus NonSlip) and the |t|-descending, index-ascending order."""
    values = np.asarray(values, dtype=float)
    slip = [i for i, lab in enumerate(labels) if lab.value == "Slip"]
    non = [i for i, lab in enumerate(labels) if lab.value == "NonSlip"]
    t = [t_score_loop([values[i, j] for i in slip], [values[i, j] for i in non])
         for j in range(values.shape[1])]
    return np.array(t), sorted(range(len(t)), key=lambda j: (-abs(t[j]), j))
