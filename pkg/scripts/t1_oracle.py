"""Arbitrary-precision oracle for the T1 fixture.

Recomputes every frozen expected value in tests/t1_expected.py with mpmath at
60 significant digits, using textbook normal equations and explicit n-by-n
projection matrices. Deliberately shares no code with the wbiv package: the
joint (unpartialled) estimator formula is used here, the package uses the
partialled one, so agreement checks both the arithmetic and the algebra.

T1 has two clusters of three rows with W = intercept. T1X appends a third
cluster; it exists because the score-projection statistics are degenerate at
q = d_z (the orthogonalized Jacobian is identically zero there), so their
oracle values need q = 3 once the instrument set is augmented to d_z = 2.

Run from the repository root:

    python scripts/t1_oracle.py            # print values
    python scripts/t1_oracle.py --write    # regenerate tests/t1_expected.py
"""

import argparse
import sys
from pathlib import Path

from mpmath import mp

mp.dps = 60

# Fixture T1.
T1_Y = [1.0, 2.0, 1.5, 0.5, 1.8, 1.2]
T1_X = [0.5, 1.0, 0.8, 0.2, 1.1, 0.7]
T1_Z = [1.0, 2.0, 1.5, 0.5, 1.9, 1.1]
T1_CLUSTERS = [0, 0, 0, 1, 1, 1]

# Fixture T1X: T1 plus a third cluster.
T1X_Y = T1_Y + [0.9, 1.6, 1.1]
T1X_X = T1_X + [0.4, 0.9, 0.6]
T1X_Z = T1_Z + [0.8, 1.7, 1.0]
T1X_CLUSTERS = T1_CLUSTERS + [2, 2, 2]


def mat(rows):
    return mp.matrix(rows)


def colvec(values):
    return mp.matrix([[mp.mpf(v)] for v in values])


def hcat(*mats):
    rows = mats[0].rows
    cols = sum(m.cols for m in mats)
    out = mp.zeros(rows, cols)
    c0 = 0
    for m in mats:
        for i in range(m.rows):
            for j in range(m.cols):
                out[i, c0 + j] = m[i, j]
        c0 += m.cols
    return out


def inv(a):
    return a**-1


def proj(a):
    """P_A = A (A'A)^{-1} A'."""
    return a * inv(a.T * a) * a.T


def ann(a):
    """M_A = I - P_A."""
    return mp.eye(a.rows) - proj(a)


def sign_sets(q):
    """Lexicographic {-1,+1}^q with -1 < +1."""
    out = []
    for idx in range(2**q):
        out.append(tuple(1 if (idx >> (q - 1 - k)) & 1 else -1 for k in range(q)))
    return out


def cluster_rows(clusters, j):
    return [i for i, c in enumerate(clusters) if c == j]


def cluster_sum_cols(a, clusters, j):
    out = mp.zeros(a.cols, 1)
    for i in cluster_rows(clusters, j):
        for k in range(a.cols):
            out[k, 0] += a[i, k]
    return out


def smallest_gen_eig(a, b):
    """Smallest lambda with det(a - lambda b) = 0; a, b symmetric, b PD."""
    low = mp.cholesky(b)
    c = inv(low) * a * inv(low).T
    c = (c + c.T) / 2
    eigvals = mp.eigsy(c, eigvals_only=True)
    return min(eigvals)


def kclass_joint(y, x, z, w, kappa):
    """Joint (unpartialled) k-class formula on [X:W] with M_[Z:W]."""
    xvec = hcat(x, w)
    zvec = hcat(z, w)
    m_zvec = ann(zvec)
    lhs = xvec.T * xvec - kappa * xvec.T * m_zvec * xvec
    rhs = xvec.T * y - kappa * xvec.T * m_zvec * y
    theta = inv(lhs) * rhs
    d_x = x.cols
    beta = theta[:d_x, 0]
    gamma = theta[d_x:, 0]
    resid = y - x * beta - w * gamma
    return beta, gamma, resid


def kappa_for(method, y, x, z, w, fuller_c=1):
    n = y.rows
    d_z, d_w = z.cols, w.cols
    if method == "tsls":
        return mp.mpf(1)
    if method == "ba":
        return mp.mpf(n) / (n - d_z + 2)
    yvec = hcat(y, x)
    a = yvec.T * ann(w) * yvec
    b = yvec.T * ann(hcat(z, w)) * yvec
    k_liml = smallest_gen_eig(a, b)
    if method == "liml":
        return k_liml
    if method == "full":
        return k_liml - mp.mpf(fuller_c) / (n - d_z - d_w)
    raise ValueError(method)


def restricted_kclass(y, x, z, w, beta, kappa, lam, lam0):
    """Footnote formula: restriction lam' beta = lam0."""
    mu = kappa - 1
    ztil = ann(w) * z
    m_zvec = ann(hcat(z, w))
    mmat = x.T * proj(ztil) * x - mu * (x.T * m_zvec * x)
    k = inv(mmat) * lam
    beta_r = beta - k * inv(lam.T * k) * (lam.T * beta - lam0)
    gamma_r = inv(w.T * w) * w.T * (y - x * beta_r)
    resid_r = y - x * beta_r - w * gamma_r
    return beta_r, gamma_r, resid_r


def first_stage(x, ztil, w, eps_hat, clusters):
    """Regress X on (Zbar, W, eps_hat); v excludes the eps_hat term."""
    n, d_z = ztil.rows, ztil.cols
    q = max(clusters) + 1
    zbar = mp.zeros(n, q * d_z)
    for i in range(n):
        j = clusters[i]
        for k in range(d_z):
            zbar[i, j * d_z + k] = ztil[i, k]
    design = hcat(zbar, w, eps_hat)
    coefs = inv(design.T * design) * design.T * x
    pi_zbar = coefs[: q * d_z, :]
    pi_w = coefs[q * d_z : q * d_z + w.cols, :]
    pi_eps = coefs[q * d_z + w.cols :, :]
    fitted = zbar * pi_zbar + w * pi_w
    v_tilde = x - fitted
    return pi_zbar, pi_w, pi_eps, v_tilde, fitted


def sign_column(g, clusters):
    return colvec([g[c] for c in clusters])


def hadamard(col, a):
    out = mp.zeros(a.rows, a.cols)
    for i in range(a.rows):
        for j in range(a.cols):
            out[i, j] = col[i, 0] * a[i, j]
    return out


def wald_norm(n, lam, beta, lam0, a_r):
    dev = lam.T * beta - lam0
    return mp.sqrt(n * (dev.T * a_r * dev)[0, 0])


def omega_cr(ztil, resid, clusters):
    """Omega_CR from per-cluster score sums; returns (Omega, scores)."""
    n, d_z = ztil.rows, ztil.cols
    q = max(clusters) + 1
    zr = hadamard(resid, ztil)
    scores = []
    omega = mp.zeros(d_z, d_z)
    for j in range(q):
        s_j = cluster_sum_cols(zr, clusters, j)
        scores.append(s_j)
        omega += s_j * s_j.T
    omega /= n
    return omega, scores


def v_hat_from(q_zx, q_zz, omega):
    q_hat = q_zx.T * inv(q_zz) * q_zx
    v = inv(q_hat) * q_zx.T * inv(q_zz) * omega * inv(q_zz) * q_zx * inv(q_hat)
    return v, q_hat


def wrec_case(y, x, z, w, clusters, method, lam, lam0, a_r):
    """Full WREC pipeline; returns dict of frozen values."""
    n = y.rows
    ztil = ann(w) * z
    q_zz = (ztil.T * ztil) / n
    q_zx = (ztil.T * x) / n

    kappa = kappa_for(method, y, x, z, w)
    beta, gamma, eps_hat = kclass_joint(y, x, z, w, kappa)
    beta_r, gamma_r, eps_r = restricted_kclass(y, x, z, w, beta, kappa, lam, lam0)

    omega, _ = omega_cr(ztil, eps_hat, clusters)
    v_hat, q_hat = v_hat_from(q_zx, q_zz, omega)
    a_r_cr = inv(lam.T * v_hat * lam)

    t_n = wald_norm(n, lam, beta, lam0, a_r)
    t_cr = wald_norm(n, lam, beta, lam0, a_r_cr)

    pi_zbar, pi_w, pi_eps, v_tilde, fitted = first_stage(x, ztil, w, eps_hat, clusters)

    t_star, t_star_cr = [], []
    boot_samples = {}
    boot_cce = {}
    for g in sign_sets(max(clusters) + 1):
        gcol = sign_column(g, clusters)
        x_star = fitted + hadamard(gcol, v_tilde)
        y_star = x_star * beta_r + w * gamma_r + hadamard(gcol, eps_r)
        kappa_g = kappa_for(method, y_star, x_star, z, w)
        beta_g, gamma_g, eps_g = kclass_joint(y_star, x_star, z, w, kappa_g)
        t_star.append(wald_norm(n, lam, beta_g, lam0, a_r))
        omega_g, _ = omega_cr(ztil, eps_g, clusters)
        q_zx_g = (ztil.T * x_star) / n
        v_g, _ = v_hat_from(q_zx_g, q_zz, omega_g)
        a_cr_g = inv(lam.T * v_g * lam)
        t_star_cr.append(wald_norm(n, lam, beta_g, lam0, a_cr_g))
        if g == (1, -1):
            boot_samples = {"x_star": x_star, "y_star": y_star}
            boot_cce = {"q_zx_star": q_zx_g, "a_r_cr_star": a_cr_g}
    return {
        "kappa": kappa,
        "beta": beta,
        "gamma": gamma,
        "eps_hat": eps_hat,
        "beta_r": beta_r,
        "gamma_r": gamma_r,
        "eps_r": eps_r,
        "omega_cr": omega,
        "v_hat": v_hat,
        "q_hat": q_hat,
        "a_r_cr": a_r_cr,
        "t_n": t_n,
        "t_cr_n": t_cr,
        "pi_zbar": pi_zbar,
        "pi_w": pi_w,
        "pi_eps": pi_eps,
        "v_tilde": v_tilde,
        "t_star": t_star,
        "t_star_cr": t_star_cr,
        "boot": boot_samples,
        "boot_cce": boot_cce,
    }


def ar_case(y, x, z, w, clusters, beta0, a_z):
    n = y.rows
    ztil = ann(w) * z
    d_z = ztil.cols
    gamma_bar = inv(w.T * w) * w.T * (y - x * beta0)
    eps_bar = y - x * beta0 - w * gamma_bar
    omega, scores = omega_cr(ztil, eps_bar, clusters)
    f_hat = mp.zeros(d_z, 1)
    for s_j in scores:
        f_hat += s_j
    f_hat /= n
    a_cr = inv(omega)
    ar = mp.sqrt(n * (f_hat.T * a_z * f_hat)[0, 0])
    ar_cr = mp.sqrt(n * (f_hat.T * a_cr * f_hat)[0, 0])
    ar_star, ar_cr_star = [], []
    for g in sign_sets(max(clusters) + 1):
        f_g = mp.zeros(d_z, 1)
        for j, s_j in enumerate(scores):
            f_g += g[j] * s_j
        f_g /= n
        ar_star.append(mp.sqrt(n * (f_g.T * a_z * f_g)[0, 0]))
        ar_cr_star.append(mp.sqrt(n * (f_g.T * a_cr * f_g)[0, 0]))
    return {
        "gamma_bar": gamma_bar,
        "eps_bar": eps_bar,
        "ar": ar,
        "ar_cr": ar_cr,
        "ar_star": ar_star,
        "ar_cr_star": ar_cr_star,
        "scores": scores,
        "f_hat": f_hat,
        "omega": omega,
    }


def sym_inv_sqrt(a):
    eigvals, q = mp.eigsy(a)
    d = mp.zeros(a.rows, a.rows)
    for i in range(a.rows):
        d[i, i] = 1 / mp.sqrt(eigvals[i])
    return q * d * q.T


def lm_cqlr_case(y, x, z, w, clusters, beta0):
    n = y.rows
    q = max(clusters) + 1
    ztil = ann(w) * z
    d_z = ztil.cols
    ar = ar_case(y, x, z, w, clusters, beta0, mp.eye(d_z))
    scores, f_hat, omega = ar["scores"], ar["f_hat"], ar["omega"]
    g_hat = (ztil.T * x) / n
    zx = hadamard(x, ztil)
    gz = [cluster_sum_cols(zx, clusters, j) for j in range(q)]
    gamma_full = mp.zeros(d_z, d_z)
    for j in range(q):
        gamma_full += gz[j] * scores[j].T
    gamma_full /= n
    d_hat = g_hat - gamma_full * inv(omega) * f_hat
    omega_isqrt = sym_inv_sqrt(omega)

    def lm_value(f_vec, d_vec):
        u = omega_isqrt * d_vec
        p = u * inv(u.T * u) * u.T
        h = omega_isqrt * f_vec
        return n * (h.T * p * h)[0, 0]

    lm = lm_value(f_hat, d_hat)
    rk = n * (d_hat.T * inv(omega) * d_hat)[0, 0]
    ar_sq = n * (f_hat.T * inv(omega) * f_hat)[0, 0]
    lr = ((ar_sq - rk) + mp.sqrt((ar_sq - rk) ** 2 + 4 * lm * rk)) / 2
    lm_star, lr_star = [], []
    for g in sign_sets(q):
        f_g = mp.zeros(d_z, 1)
        gamma_g = mp.zeros(d_z, d_z)
        for j in range(q):
            f_g += g[j] * scores[j]
            gamma_g += g[j] * gz[j] * scores[j].T
        f_g /= n
        gamma_g /= n
        d_g = g_hat - gamma_g * inv(omega) * f_g
        lm_g = lm_value(f_g, d_g)
        ar_sq_g = n * (f_g.T * inv(omega) * f_g)[0, 0]
        lr_g = ((ar_sq_g - rk) + mp.sqrt((ar_sq_g - rk) ** 2 + 4 * lm_g * rk)) / 2
        lm_star.append(lm_g)
        lr_star.append(lr_g)
    return {
        "d_hat": d_hat,
        "lm": lm,
        "rk": rk,
        "ar_sq": ar_sq,
        "lr": lr,
        "lm_star": lm_star,
        "lr_star": lr_star,
    }


def fnum(v):
    return repr(float(v))


def fmt(value, indent=0):
    pad = " " * indent
    if isinstance(value, mp.matrix([0]).__class__):
        if value.cols == 1:
            return "[" + ", ".join(fnum(value[i, 0]) for i in range(value.rows)) + "]"
        rows = []
        for i in range(value.rows):
            rows.append("[" + ", ".join(fnum(value[i, j]) for j in range(value.cols)) + "]")
        return "[" + (",\n " + pad).join(rows) + "]"
    if isinstance(value, list):
        return "[" + ", ".join(fnum(v) for v in value) + "]"
    return fnum(value)


def build_values():
    n = len(T1_Y)
    y = colvec(T1_Y)
    x = colvec(T1_X)
    z1 = colvec(T1_Z)
    w = colvec([1.0] * n)
    z2 = hcat(z1, colvec([v * v for v in T1_Z]))
    clusters = T1_CLUSTERS

    out = {}

    # Moments and diagnostics on T1.
    ztil = ann(w) * z1
    out["Q_ZZ"] = (ztil.T * ztil) / n
    out["Q_ZX"] = (ztil.T * x) / n
    for j in range(2):
        rows = cluster_rows(clusters, j)
        n_j = len(rows)
        qzx = sum(ztil[i, 0] * x[i, 0] for i in rows)
        qzw = sum(ztil[i, 0] for i in rows)
        out[f"Q_ZX_{j + 1}"] = qzx / n_j
        out[f"Q_ZW_{j + 1}"] = qzw / n_j

    # Per-cluster first-stage slopes: OLS of x on (z, 1) within cluster.
    for j in range(2):
        rows = cluster_rows(clusters, j)
        zj = mp.matrix([[z1[i, 0], 1] for i in rows])
        xj = mp.matrix([[x[i, 0]] for i in rows])
        coef = inv(zj.T * zj) * zj.T * xj
        out[f"FS_SLOPE_{j + 1}"] = coef[0, 0]

    lam = mp.matrix([[1]])
    a_r = mp.matrix([[1]])

    # Restricted fits used by the kclass examples.
    beta_t, gamma_t, eps_t = kclass_joint(y, x, z1, w, mp.mpf(1))
    out["TSLS_BETA"] = beta_t[0, 0]
    out["TSLS_GAMMA"] = gamma_t[0, 0]
    out["TSLS_RESID"] = eps_t
    br, gr, er = restricted_kclass(y, x, z1, w, beta_t, mp.mpf(1), lam, mp.matrix([[mp.mpf("0.5")]]))
    out["RESTR_BETA_05"] = br[0, 0]
    out["RESTR_GAMMA_05"] = gr[0, 0]
    out["RESTR_RESID_05"] = er
    gamma_bar = inv(w.T * w) * w.T * (y - x * mp.mpf("0.3"))
    out["ROLS_GAMMA_03"] = gamma_bar[0, 0]
    out["ROLS_RESID_03"] = y - x * mp.mpf("0.3") - w * gamma_bar

    # WREC pipeline on T1, TSLS, H0: beta = 0.
    zero = mp.matrix([[0]])
    case = wrec_case(y, x, z1, w, clusters, "tsls", lam, zero, a_r)
    out["OMEGA_CR"] = case["omega_cr"][0, 0]
    out["V_HAT"] = case["v_hat"][0, 0]
    out["A_R_CR"] = case["a_r_cr"][0, 0]
    out["Q_HAT"] = case["q_hat"][0, 0]
    out["T_N"] = case["t_n"]
    out["T_CR_N"] = case["t_cr_n"]
    out["PI_ZBAR"] = case["pi_zbar"]
    out["PI_W"] = case["pi_w"][0, 0]
    out["PI_EPS"] = case["pi_eps"][0, 0]
    out["V_TILDE"] = case["v_tilde"]
    out["TSTAR_N"] = case["t_star"]
    out["TSTAR_CR_N"] = case["t_star_cr"]
    out["XSTAR_PM"] = case["boot"]["x_star"]
    out["YSTAR_PM"] = case["boot"]["y_star"]
    out["QZX_STAR_PM"] = case["boot_cce"]["q_zx_star"][0, 0]
    out["A_R_CR_STAR_PM"] = case["boot_cce"]["a_r_cr_star"][0, 0]

    # AR at beta0 = 0 on T1.
    ar = ar_case(y, x, z1, w, clusters, mp.matrix([[0]]), mp.eye(1))
    out["AR_N"] = ar["ar"]
    out["AR_CR_N"] = ar["ar_cr"]
    out["ARSTAR_N"] = ar["ar_star"]
    out["ARSTAR_CR_N"] = ar["ar_cr_star"]

    # Score-bootstrap statistic and distribution on T1.
    q_zx = out["Q_ZX"][0, 0]
    out["SCORE_STAT"] = abs(1 / q_zx) * ar["ar"]
    out["SCORE_STAR"] = [abs(1 / q_zx) * v for v in ar["ar_star"]]

    # d_z = 2 augmentation of T1: LIML kappa and the overidentified pipeline.
    out["KAPPA_LIML_DZ2"] = kappa_for("liml", y, x, z2, w)
    beta_l, _, _ = kclass_joint(y, x, z2, w, out["KAPPA_LIML_DZ2"])
    out["LIML_BETA_DZ2"] = beta_l[0, 0]
    case2 = wrec_case(y, x, z2, w, clusters, "tsls", lam, zero, a_r)
    out["T_N_DZ2"] = case2["t_n"]
    out["T_CR_N_DZ2"] = case2["t_cr_n"]
    out["TSTAR_N_DZ2"] = case2["t_star"]
    out["TSTAR_CR_N_DZ2"] = case2["t_star_cr"]
    case2l = wrec_case(y, x, z2, w, clusters, "liml", lam, zero, a_r)
    out["T_N_DZ2_LIML"] = case2l["t_n"]
    out["TSTAR_N_DZ2_LIML"] = case2l["t_star"]
    ar2 = ar_case(y, x, z2, w, clusters, mp.matrix([[0]]), mp.eye(2))
    out["AR_N_DZ2"] = ar2["ar"]
    out["AR_CR_N_DZ2"] = ar2["ar_cr"]
    out["ARSTAR_N_DZ2"] = ar2["ar_star"]
    out["ARSTAR_CR_N_DZ2"] = ar2["ar_cr_star"]
    # q = d_z here, so the squared CCE-weighted AR statistic collapses to d_z.
    omega2 = ar2["omega"]
    f2 = ar2["f_hat"]
    out["AR_CR_SQ_DZ2"] = n * (f2.T * inv(omega2) * f2)[0, 0]

    # LM / CQLR need q > d_z once d_z = 2: use T1X (third cluster appended).
    nx = len(T1X_Y)
    yx = colvec(T1X_Y)
    xx = colvec(T1X_X)
    zx1 = colvec(T1X_Z)
    wx = colvec([1.0] * nx)
    zx2 = hcat(zx1, colvec([v * v for v in T1X_Z]))
    lm = lm_cqlr_case(yx, xx, zx2, wx, T1X_CLUSTERS, mp.matrix([[0]]))
    out["D_HAT_T1X"] = lm["d_hat"]
    out["LM_N_T1X"] = lm["lm"]
    out["RK_T1X"] = lm["rk"]
    out["AR_CR_SQ_T1X"] = lm["ar_sq"]
    out["LR_N_T1X"] = lm["lr"]
    out["LMSTAR_T1X"] = lm["lm_star"]
    out["LRSTAR_T1X"] = lm["lr_star"]

    return out


def render(values):
    lines = [
        '"""Frozen oracle values for the T1 fixture.',
        "",
        "Generated by scripts/t1_oracle.py (mpmath, 60 digits). Do not edit by",
        "hand; rerun the script with --write to regenerate.",
        '"""',
        "",
        "# Bootstrap distributions are ordered over the lexicographic sign set,",
        "# [(-1, -1), (-1, +1), (+1, -1), (+1, +1)] for q = 2.",
        "",
    ]
    for key, value in values.items():
        lines.append(f"{key} = {fmt(value, indent=len(key) + 4)}")
    return "\n".join(lines) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--write", action="store_true", help="write tests/t1_expected.py")
    args = parser.parse_args()
    text = render(build_values())
    if args.write:
        target = Path(__file__).resolve().parent.parent / "tests" / "t1_expected.py"
        target.write_text(text)
        print(f"wrote {target}", file=sys.stderr)
    else:
        print(text)


if __name__ == "__main__":
    main()
