#!/usr/bin/env python3
"""Reference values frozen into the test suite, computed at high precision.

Run: python3 tools/oracles/derive.py
Needs mpmath and scipy.
"""
import mpmath as mp
from scipy.optimize import brentq

mp.mp.dps = 50


def invlogit(x):
    return 1 / (1 + mp.exp(-x))


def logit(p):
    return mp.log(p) - mp.log(1 - p)


def ten_year_to_daily(p10):
    tau = -mp.log(1 - mp.mpf(p10)) / 3650
    return tau, 1 - mp.exp(-tau)


def show(name, value):
    print(f"{name} = {mp.nstr(value, 17)}")


print("# one-day conversion")
for p in ["0.1", "0.05", "0.5", "0.99"]:
    tau, p1 = ten_year_to_daily(mp.mpf(p))
    show(f"tau({p})", tau)
    show(f"p1({p})", p1)

print("# stroke: man 60, smoker, SBP 150, HDL 1.3, no diabetes or parental stroke")
ors = [1.12, 1.65, 1.02, 0.64, 2.41, 1.34]
b = [mp.log(mp.mpf(str(o))) for o in ors]
x = [60, 1, 150, mp.mpf("1.3"), 0, 0]
lin = sum(bi * xi for bi, xi in zip(b, x))
intercept = logit(mp.mpf("0.05")) - lin
show("intercept for p10 = 0.05", intercept)
show("p1", ten_year_to_daily(mp.mpf("0.05"))[1])

print("# diabetes: age 50, BMI 30, waist 100, BP medication, no high glucose, p10 = 0.2")
db = [mp.mpf(v) for v in ["0.04", "0.08", "0.03", "0.5", "1.6"]]
dx = [50, 30, 100, 1, 0]
dlin = sum(bi * xi for bi, xi in zip(db, dx))
show("intercept for p10 = 0.2", logit(mp.mpf("0.2")) - dlin)
show("p1", ten_year_to_daily(mp.mpf("0.2"))[1])

print("# background death, shape 1, scale 36500, age 100")
show("p", 1 - mp.exp(-mp.mpf(100) / 36500))

print("# 28-day fatality 0.28 with constant daily risk")
q = 1 - mp.mpf("0.72") ** (mp.mpf(1) / 28)
show("q", q)
show("alpha0", logit(1 - q))


def cumulative_death(day, a1, a2, a3, s28=mp.mpf("0.72")):
    log_s = mp.log(s28)
    for k in range(28, day):
        log_s += mp.log(invlogit(a1 + a2 * mp.exp(a3 * (k - 27))))
    return 1 - mp.exp(log_s)


print("# late survival targets from (7, 0.5, -0.001)")
mp.mp.dps = 30
for d in [365, 1825, 3650, 5475]:
    show(f"death({d})", cumulative_death(d, 7, mp.mpf("0.5"), mp.mpf("-0.001")))
mp.mp.dps = 50

print("# non-participation probability, rho = (-9.48, -0.31, 0.11, -0.09, 0.69, 0.04)")
rho = [mp.mpf(v) for v in ["-9.48", "-0.31", "0.11", "-0.09", "0.69", "0.04"]]
for label, cov in [("man 60, BMI 25, smoker, waist 95", [0, 60, 25, 1, 95]),
                   ("woman 60, BMI 25, smoker, waist 95", [1, 60, 25, 1, 95]),
                   ("man 50, BMI 27, smoker, waist 95", [0, 50, 27, 1, 95]),
                   ("woman 50, BMI 27, non-smoker, waist 88", [1, 50, 27, 0, 88])]:
    show(label, invlogit(rho[0] + sum(r * c for r, c in zip(rho[1:], cov))))

print("# misc")
show("normal quantile 0.975", mp.sqrt(2) * mp.erfinv(2 * mp.mpf("0.975") - 1))
show("(ln 2)^2", mp.log(2) ** 2)
show("logit(0.25)", mp.log(mp.mpf(1) / 3))


print("# SBP mean and SD on the natural scale, Box-Cox lambda -0.5, range [80, 250]")


def sbp_moments(median, sd, lam=mp.mpf("-0.5"), lo=80, hi=250):
    mu = (median ** lam - 1) / lam
    s = sd * median ** (lam - 1)
    inv = lambda z: (lam * z + 1) ** (1 / lam)
    fwd = lambda x: (x ** lam - 1) / lam
    zlo, zhi = fwd(mp.mpf(lo)), fwd(mp.mpf(hi))
    dens = lambda z: mp.npdf(z, mu, s)
    mass = mp.quad(dens, [zlo, zhi])
    m1 = mp.quad(lambda z: inv(z) * dens(z), [zlo, zhi]) / mass
    m2 = mp.quad(lambda z: inv(z) ** 2 * dens(z), [zlo, zhi]) / mass
    return m1, mp.sqrt(m2 - m1 ** 2)


for label, sex, mid, smoker in [("men 60-69 non-smokers", 0, 65, 0), ("women 60-69 non-smokers", 1, 65, 0),
                                ("men 30-39 smokers", 0, 35, 1)]:
    a = mid - 30
    if sex == 0:
        median, sd = mp.mpf(124) + mp.mpf("0.45") * a, mp.mpf(14) + mp.mpf("0.12") * a
    else:
        median, sd = mp.mpf(114) + mp.mpf("0.65") * a, mp.mpf(13) + mp.mpf("0.20") * a
    median -= smoker
    m, s = sbp_moments(median, sd)
    show(f"{label}: mean", m)
    show(f"{label}: sd", s)

print("# check: brentq recovers p10 from p1")
print(brentq(lambda p: float(ten_year_to_daily(mp.mpf(p))[1]) - 1.4052700e-5, 1e-6, 0.5))
