"""Independent reference implementations used by several test modules."""

import mpmath


def brute_anova(groups, digits=30):
    """F and p from explicit sums of squares and mpmath's incomplete beta."""
    with mpmath.workdps(digits):
        groups = [[mpmath.mpf(float(x)) for x in g] for g in groups]
        n = sum(len(g) for g in groups)
        k = len(groups)
        grand = sum(sum(g) for g in groups) / n
        means = [sum(g) / len(g) for g in groups]
        ssb = mpmath.mpf(0)
        ssw = mpmath.mpf(0)
        for g, m in zip(groups, means):
            ssb += len(g) * (m - grand) ** 2
            for x in g:
                ssw += (x - m) ** 2
        dfn, dfd = k - 1, n - k
        f = (ssb / dfn) / (ssw / dfd)
        x = dfd / (dfd + dfn * f)
        p = mpmath.betainc(mpmath.mpf(dfd) / 2, mpmath.mpf(dfn) / 2, 0, x, regularized=True)
        return float(f), float(p)
