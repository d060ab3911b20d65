# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernels.

Each kernel runs a contiguous range of sample indices and writes one
result per sample.  Sample ``i`` draws only from its own keyed streams,
so results do not depend on the thread count or on how a run is split
into batches.  The draw layouts are those of :mod:`itersurv.generators`,
and :mod:`itersurv._fallback` provides the same functions in numpy.
"""

import numpy as np

from cython.parallel cimport parallel, prange
from libc.math cimport INFINITY, NAN, ceil, exp, fabs, floor, fmod, lgamma, log, pow, sqrt
from libc.stdint cimport int64_t, uint8_t, uint64_t
from libc.stdlib cimport free, malloc, qsort


cdef extern from "_philox.h" nogil:
    void itersurv_philox(uint64_t k0, uint64_t k1, uint64_t c0, uint64_t c1,
                         uint64_t c2, uint64_t c3, uint64_t *out)
    double itersurv_ndtri(double p)


cdef extern from *:
    """
    static inline int itersurv_popcount(unsigned long long x) { return __builtin_popcountll(x); }
    """
    int itersurv_popcount(unsigned long long x) nogil


cdef extern from *:
    """
    #define ITERSURV_TWO53 1.1102230246251565e-16
    #define ITERSURV_DOMAIN 0x6974657273757276ULL
    #define ITERSURV_JUMP_OFFSET (1ULL << 62)
    """
    const double TWO53 "ITERSURV_TWO53"
    const uint64_t DOMAIN "ITERSURV_DOMAIN"
    const uint64_t JUMP_OFFSET "ITERSURV_JUMP_OFFSET"


cdef enum:
    MAX_ORDER = 8
    # process descriptor slots
    P_KIND = 0
    P_LAW = 1
    P_MU = 5
    P_SIGMA = 6
    P_LAM = 7
    P_ORDER = 8
    P_BRIDGE = 9
    P_SIZE = 12
    # process kinds
    K_RW = 0
    K_LEVY = 1
    K_IBM = 2
    K_CEX = 3
    K_CHAIN = 4
    # job descriptor slots
    J_COMPOSE = 0
    J_TWO = 1
    J_DENSE = 2
    J_FILL = 3
    J_INNER_STEP = 4
    J_INNER_COUNT = 5
    J_BASE_STEP = 6
    J_BASE_COUNT = 7
    J_HORIZON = 8
    J_STOP = 9
    J_BARRIER = 10
    J_FILL_CAP = 11
    J_SIZE = 12
    # increment law codes
    L_RADEMACHER = 0
    L_GAUSSIAN = 1
    L_LAPLACE = 2
    L_WEIBULL = 3
    L_CONSTANT = 4


# ---------------------------------------------------------------------------
# streams


cdef struct Stream:
    uint64_t k0
    uint64_t k1
    uint64_t blk0
    uint64_t blk1
    uint64_t buf0[4]
    uint64_t buf1[4]
    int mru


cdef inline void stream_init(Stream *s, uint64_t seed, uint64_t scenario, uint64_t grid,
                             uint64_t sample, uint64_t channel) noexcept nogil:
    cdef uint64_t out[4]
    itersurv_philox(seed, DOMAIN, scenario, grid, sample, channel, out)
    s.k0 = out[0]
    s.k1 = out[1]
    s.blk0 = <uint64_t>(-1)
    s.blk1 = <uint64_t>(-1)
    s.mru = 0


cdef inline uint64_t draw(Stream *s, uint64_t i) noexcept nogil:
    # draw i is lane i % 4 of the block with counter i // 4 + 1
    cdef uint64_t b = i >> 2
    if s.blk0 == b:
        s.mru = 0
        return s.buf0[i & 3]
    if s.blk1 == b:
        s.mru = 1
        return s.buf1[i & 3]
    if s.mru == 0:
        itersurv_philox(s.k0, s.k1, b + 1, 0, 0, 0, s.buf1)
        s.blk1 = b
        s.mru = 1
        return s.buf1[i & 3]
    itersurv_philox(s.k0, s.k1, b + 1, 0, 0, 0, s.buf0)
    s.blk0 = b
    s.mru = 0
    return s.buf0[i & 3]


cdef inline double u01(uint64_t x) noexcept nogil:
    return <double>(x >> 11) * TWO53


cdef inline double uopen(uint64_t x) noexcept nogil:
    return (<double>(x >> 11) + 0.5) * TWO53


cdef inline double normal(Stream *s, uint64_t i) noexcept nogil:
    return itersurv_ndtri(uopen(draw(s, i)))


# ---------------------------------------------------------------------------
# laws and processes


cdef struct Law:
    int code
    double a
    double b
    double c
    uint64_t draws


cdef struct Proc:
    int kind
    Law law
    double mu
    double sigma
    double lam
    int order
    int bridge


cdef inline double law_value(const Law *L, Stream *s, uint64_t o) noexcept nogil:
    cdef double u, mag
    if L.code == L_RADEMACHER:
        return 1.0 if (draw(s, o) >> 63) else -1.0
    if L.code == L_GAUSSIAN:
        return L.a + L.b * itersurv_ndtri(uopen(draw(s, o)))
    if L.code == L_LAPLACE:
        u = uopen(draw(s, o))
        if u < 0.5:
            return L.a + L.b * log(2.0 * u)
        return L.a - L.b * log(2.0 - 2.0 * u)
    if L.code == L_WEIBULL:
        mag = L.b * pow(-log(uopen(draw(s, o + 1))), 1.0 / L.a)
        if draw(s, o) >> 63:
            return L.c + mag
        return L.c - mag
    return L.a


cdef inline double rw_inc(const Law *L, Stream *s, uint64_t k) noexcept nogil:
    if L.code == L_RADEMACHER:
        return 1.0 if (draw(s, k >> 6) >> (63 - (k & 63))) & 1 else -1.0
    return law_value(L, s, k * L.draws)


cdef inline int64_t poisson_inv(double m, double u) noexcept nogil:
    cdef double k, p, cdf, limit
    if m <= 0.0:
        return 0
    k = floor(m - 12.0 * sqrt(m) - 10.0)
    if k < 0.0:
        k = 0.0
    p = exp(k * log(m) - m - lgamma(k + 1.0))
    cdf = p
    limit = m + 20.0 * sqrt(m) + 50.0
    while u >= cdf and k < limit:
        k += 1.0
        p = p * m / k
        cdf += p
    return <int64_t>k


cdef inline double levy_cell(const Proc *P, Stream *s, uint64_t k, double w, uint64_t *jidx,
                             double x, int bridge, double *sup) noexcept nogil:
    """Advance across cell ``k`` of width ``w`` from value ``x``; returns the end value."""
    cdef double inc = 0.0, jsum = 0.0, y, pre, d, top
    cdef int64_t cnt, r
    if P.sigma > 0.0:
        inc = P.mu * w + (P.sigma * sqrt(w)) * normal(s, 4 * k)
    elif P.mu != 0.0:
        inc = P.mu * w
    if P.lam > 0.0:
        cnt = poisson_inv(P.lam * w, u01(draw(s, 4 * k + 1)))
        for r in range(cnt):
            jsum += law_value(&P.law, s, JUMP_OFFSET + jidx[0] * P.law.draws)
            jidx[0] += 1
    y = x + (inc + jsum)
    if bridge:
        pre = x + inc
        if P.sigma > 0.0:
            d = pre - x
            top = 0.5 * (x + pre + sqrt(d * d - 2.0 * P.sigma * P.sigma * w * log(uopen(draw(s, 4 * k + 2)))))
        else:
            top = x if x > pre else pre
        sup[0] = top if top > y else y
    else:
        sup[0] = y
    return y


cdef enum:
    CELL_BATCH = 32

# -log of the smallest open uniform (2^-54) is 37.43; bridge maxima never pass this bound
cdef double BRIDGE_EMAX = 37.5


cdef int diffusion_cells(const Proc *P, Stream *s, uint64_t m, double h, double wl,
                         double stop, double *mx) noexcept nogil:
    """``levy_cell`` over ``m`` cells for a jump-free Levy process with ``sigma > 0``.

    Width ``h`` except the last cell (``wl``).  Normals are drawn in batches so
    consecutive counter blocks overlap; the bridge draw is skipped when its
    largest possible maximum is already below the running maximum.  Results are
    identical to the cell-by-cell loop.
    """
    cdef double z[CELL_BATCH]
    cdef uint64_t ub[CELL_BATCH]
    cdef uint64_t out[4]
    cdef uint64_t k0 = 0, j, nb
    cdef double x = 0.0, w, inc, pre, y, d, top, s2w, room
    while k0 < m:
        nb = m - k0 if m - k0 < CELL_BATCH else CELL_BATCH
        for j in range(nb):
            itersurv_philox(s.k0, s.k1, k0 + j + 1, 0, 0, 0, out)
            z[j] = itersurv_ndtri(uopen(out[0]))
            ub[j] = out[2]
        for j in range(nb):
            w = h if k0 + j + 1 < m else wl
            inc = P.mu * w + (P.sigma * sqrt(w)) * z[j]
            y = x + (inc + 0.0)
            if P.bridge:
                pre = x + inc
                d = pre - x
                s2w = 2.0 * P.sigma * P.sigma * w
                room = 2.0 * mx[0] - x - pre
                if room >= 0.0 and d * d + s2w * BRIDGE_EMAX <= room * room:
                    x = y
                    continue
                top = 0.5 * (x + pre + sqrt(d * d - s2w * log(uopen(ub[j]))))
                if note(top if top > y else y, stop, mx):
                    return 1
            elif note(y, stop, mx):
                return 1
            x = y
        k0 += nb
    return 0


cdef void decode_proc(const double *d, Proc *P) noexcept nogil:
    P.kind = <int>d[P_KIND]
    P.law.code = <int>d[P_LAW]
    P.law.a = d[P_LAW + 1]
    P.law.b = d[P_LAW + 2]
    P.law.c = d[P_LAW + 3]
    if P.law.code == L_CONSTANT:
        P.law.draws = 0
    elif P.law.code == L_WEIBULL:
        P.law.draws = 2
    else:
        P.law.draws = 1
    P.mu = d[P_MU]
    P.sigma = d[P_SIGMA]
    P.lam = d[P_LAM]
    P.order = <int>d[P_ORDER]
    P.bridge = <int>d[P_BRIDGE]


# ---------------------------------------------------------------------------
# integrated Brownian motion


cdef struct Ibm:
    int n                 # state dimension (order + 1)
    double h
    const double *trans   # n x n row-major
    const double *chol


cdef inline double ibm_step(const Ibm *G, Stream *s, uint64_t step, double *state) noexcept nogil:
    cdef int n = G.n, j, k
    cdef double z[MAX_ORDER]
    cdef double nxt[MAX_ORDER]
    cdef double acc
    cdef uint64_t base = step * <uint64_t>n
    if n == 1:
        state[0] += sqrt(G.h) * normal(s, base)
        return state[0]
    for j in range(n):
        z[j] = normal(s, base + j)
    for k in range(n):
        acc = 0.0
        for j in range(k + 1):
            acc += G.trans[k * n + j] * state[j]
        for j in range(n):
            acc += G.chol[k * n + j] * z[j]
        nxt[k] = acc
    for k in range(n):
        state[k] = nxt[k]
    return state[n - 1]


# ---------------------------------------------------------------------------
# sorted distinct query scanning


cdef int cmp_double(const void *a, const void *b) noexcept nogil:
    cdef double x = (<const double *>a)[0]
    cdef double y = (<const double *>b)[0]
    return (x > y) - (x < y)


cdef inline void small_sort(double *a, int64_t n) noexcept nogil:
    cdef int64_t i, j
    cdef double v
    if n > 24:
        qsort(a, n, sizeof(double), cmp_double)
        return
    for i in range(1, n):
        v = a[i]
        j = i - 1
        while j >= 0 and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


cdef struct Scan:
    double *q        # values grouped by bucket
    int64_t *start   # bucket boundaries, nb + 1 entries
    int64_t nb
    int64_t b
    int64_t pos
    int64_t end
    double last


cdef void scan_setup(Scan *S, const double *src, int64_t n, double *q, int64_t *start) noexcept nogil:
    """Bucket ``src`` by value into ``q`` so it can be read back sorted, lazily."""
    cdef int64_t i, b, nb = n if n > 0 else 1
    cdef double qmax = 0.0, w
    for i in range(n):
        if src[i] > qmax:
            qmax = src[i]
    w = qmax / <double>nb
    for b in range(nb + 1):
        start[b] = 0
    for i in range(n):
        b = <int64_t>(src[i] / w) if w > 0.0 else 0
        if b >= nb:
            b = nb - 1
        start[b + 1] += 1
    for b in range(nb):
        start[b + 1] += start[b]
    # scatter, using start[b] as a cursor then shifting back
    for i in range(n):
        b = <int64_t>(src[i] / w) if w > 0.0 else 0
        if b >= nb:
            b = nb - 1
        q[start[b]] = src[i]
        start[b] += 1
    for b in range(nb, 0, -1):
        start[b] = start[b - 1]
    start[0] = 0
    S.q = q
    S.start = start
    S.nb = nb
    S.b = -1
    S.pos = 0
    S.end = 0
    S.last = 0.0


cdef inline int scan_next(Scan *S, double *out) noexcept nogil:
    """Next distinct positive value in increasing order; 0 when exhausted."""
    cdef double v
    while True:
        while S.pos >= S.end:
            S.b += 1
            if S.b >= S.nb:
                return 0
            S.pos = S.start[S.b]
            S.end = S.start[S.b + 1]
            small_sort(S.q + S.pos, S.end - S.pos)
        v = S.q[S.pos]
        S.pos += 1
        if v > S.last:
            S.last = v
            out[0] = v
            return 1


# ---------------------------------------------------------------------------
# outer branches


cdef inline int note(double v, double stop, double *mx) noexcept nogil:
    if v > mx[0]:
        mx[0] = v
    return v > stop


cdef int branch_queries(const Proc *P, Stream *s, Scan *S, double stop, double *mx) noexcept nogil:
    """Scan an outer branch at sorted distinct positive queries; 1 if it went above ``stop``."""
    cdef double q, prev = 0.0, x = 0.0, sup, d
    cdef uint64_t k = 0, jidx = 0, target, n
    cdef int64_t idx = 0
    if P.kind == K_LEVY:
        while scan_next(S, &q):
            x = levy_cell(P, s, k, q - prev, &jidx, x, 0, &sup)
            k += 1
            prev = q
            if note(x, stop, mx):
                return 1
        return 0
    if P.kind == K_RW:
        while scan_next(S, &q):
            target = <uint64_t>floor(q)
            while k < target:
                x += rw_inc(&P.law, s, k)
                k += 1
            if note(x, stop, mx):
                return 1
        return 0
    if P.kind == K_CEX:
        while scan_next(S, &q):
            d = 2.0 * q
            x = 0.0
            if d == floor(d) and fmod(d, 2.0) == 1.0:
                n = <uint64_t>((d + 1.0) / 2.0)
                if u01(draw(s, n - 1)) < 1.0 / <double>(n + 1):
                    x = 2.0
            if note(x, stop, mx):
                return 1
        return 0
    return 0


cdef int branch_dense(const Proc *P, Stream *s, double reach, double h, double stop,
                      double *mx) noexcept nogil:
    """Scan an outer branch over ``[0, reach]``; 1 if it went above ``stop``."""
    cdef uint64_t k, m, jidx = 0
    cdef double x = 0.0, sup, w
    if not reach > 0.0:
        return 0
    if P.kind == K_LEVY:
        m = <uint64_t>ceil(reach / h)
        if m < 1:
            m = 1
        if P.lam == 0.0 and P.sigma > 0.0:
            return diffusion_cells(P, s, m, h, reach - <double>(m - 1) * h, stop, mx)
        for k in range(m):
            w = h if k + 1 < m else reach - <double>(m - 1) * h
            x = levy_cell(P, s, k, w, &jidx, x, P.bridge, &sup)
            if note(sup, stop, mx):
                return 1
        return 0
    if P.kind == K_RW:
        m = <uint64_t>floor(reach)
        for k in range(m):
            x += rw_inc(&P.law, s, k)
            if note(x, stop, mx):
                return 1
        return 0
    if P.kind == K_CEX:
        m = <uint64_t>floor(reach + 0.5)
        for k in range(1, m + 1):
            x = 2.0 if u01(draw(s, k - 1)) < 1.0 / <double>(k + 1) else 0.0
            if note(x, stop, mx):
                return 1
        return 0
    return 0


cdef int branch_baseline(const Proc *P, const Ibm *G, Stream *s, const double *job,
                         double stop, double *mx) noexcept nogil:
    cdef uint64_t k, m, jidx = 0
    cdef double x = 0.0, sup, h
    cdef double state[MAX_ORDER]
    if P.kind == K_LEVY:
        m = <uint64_t>job[J_BASE_COUNT]
        h = job[J_BASE_STEP]
        if P.lam == 0.0 and P.sigma > 0.0 and m > 0:
            return diffusion_cells(P, s, m, h, h, stop, mx)
        for k in range(m):
            x = levy_cell(P, s, k, h, &jidx, x, P.bridge, &sup)
            if note(sup, stop, mx):
                return 1
        return 0
    if P.kind == K_IBM:
        m = <uint64_t>job[J_BASE_COUNT]
        for k in range(G.n):
            state[k] = 0.0
        for k in range(m):
            x = ibm_step(G, s, k, state)
            if note(x, stop, mx):
                return 1
        return 0
    if P.kind == K_RW:
        return branch_dense(P, s, floor(job[J_HORIZON]), 1.0, stop, mx)
    if P.kind == K_CEX:
        return branch_dense(P, s, job[J_HORIZON], 1.0, stop, mx)
    return 0


# ---------------------------------------------------------------------------
# inner paths


cdef void inner_values(const Proc *P, const Ibm *G, Stream *s, const double *job,
                       double *v) noexcept nogil:
    """Inner path on its grid into ``v[0..count]``."""
    cdef uint64_t k, m = <uint64_t>job[J_INNER_COUNT], jidx = 0
    cdef double h = job[J_INNER_STEP], sup
    cdef double state[MAX_ORDER]
    v[0] = 0.0
    if P.kind == K_RW:
        for k in range(m):
            v[k + 1] = v[k] + rw_inc(&P.law, s, k)
    elif P.kind == K_LEVY:
        for k in range(m):
            v[k + 1] = levy_cell(P, s, k, h, &jidx, v[k], 0, &sup)
    elif P.kind == K_IBM:
        for k in range(G.n):
            state[k] = 0.0
        for k in range(m):
            v[k + 1] = ibm_step(G, s, k, state)


cdef void inner_extrema(const Proc *P, const Ibm *G, Stream *s, const double *job,
                        double *hi, double *lo) noexcept nogil:
    """Maximum and minimum (both including the origin) of the inner path."""
    cdef uint64_t k, m = <uint64_t>job[J_INNER_COUNT], jidx = 0
    cdef int level
    cdef double h = job[J_INNER_STEP], x = 0.0, sup, reach, top, bot, c
    cdef double state[MAX_ORDER]
    top = 0.0
    bot = 0.0
    if P.kind == K_CHAIN:
        reach = job[J_HORIZON]
        for level in range(P.order):
            if level:
                reach = top if top > -bot else -bot
            c = sqrt(reach / <double>m)
            x = 0.0
            top = 0.0
            bot = 0.0
            for k in range(m):
                x += c * normal(s, <uint64_t>level * m + k)
                if x > top:
                    top = x
                if x < bot:
                    bot = x
    elif P.kind == K_IBM:
        for k in range(G.n):
            state[k] = 0.0
        for k in range(m):
            x = ibm_step(G, s, k, state)
            if x > top:
                top = x
            if x < bot:
                bot = x
    elif P.kind == K_LEVY:
        for k in range(m):
            x = levy_cell(P, s, k, h, &jidx, x, 0, &sup)
            if x > top:
                top = x
            if x < bot:
                bot = x
    hi[0] = top
    lo[0] = bot


cdef inline double inner_grid_step(const double *job) noexcept nogil:
    return job[J_INNER_STEP]


cdef inline double fill_step(const double *job, double reach) noexcept nogil:
    cdef double h = job[J_FILL]
    cdef double cap
    if h > 0.0:
        return h
    h = pow(inner_grid_step(job), 1.5)
    cap = job[J_FILL_CAP] * reach
    return h if h < cap else cap


# ---------------------------------------------------------------------------
# one sample


cdef struct Scratch:
    double *v
    double *qa
    double *qb
    double *src
    int64_t *ba
    int64_t *bb


cdef void run_sample(const double *job, const Proc *plus, const Proc *minus, const Proc *inner,
                     const Ibm *G, uint64_t seed, uint64_t scen, uint64_t grid, uint64_t i,
                     double *v, double *qa, double *qb, double *src, int64_t *ba, int64_t *bb,
                     uint8_t *survived, double *maxval) noexcept nogil:
    cdef Stream s_in, s_plus, s_minus
    cdef Scratch Wb
    cdef Scratch *W = &Wb
    Wb.v = v
    Wb.qa = qa
    Wb.qb = qb
    Wb.src = src
    Wb.ba = ba
    Wb.bb = bb
    cdef double mx = 0.0, stop = job[J_STOP], hi, lo, reach, a
    cdef int two = job[J_TWO] != 0.0, hit = 0
    cdef int64_t k, m, na, nb
    cdef Scan S
    stream_init(&s_plus, seed, scen, grid, i, 1)
    if job[J_COMPOSE] == 0.0:
        hit = branch_baseline(plus, G, &s_plus, job, stop, &mx)
        if two and not hit:
            stream_init(&s_minus, seed, scen, grid, i, 2)
            hit = branch_baseline(minus, G, &s_minus, job, stop, &mx)
    elif job[J_DENSE] != 0.0:
        stream_init(&s_in, seed, scen, grid, i, 0)
        inner_extrema(inner, G, &s_in, job, &hi, &lo)
        if two:
            hit = branch_dense(plus, &s_plus, hi, fill_step(job, hi), stop, &mx)
            if not hit and -lo > 0.0:
                stream_init(&s_minus, seed, scen, grid, i, 2)
                hit = branch_dense(minus, &s_minus, -lo, fill_step(job, -lo), stop, &mx)
        else:
            reach = hi if hi > -lo else -lo
            hit = branch_dense(plus, &s_plus, reach, fill_step(job, reach), stop, &mx)
    else:
        stream_init(&s_in, seed, scen, grid, i, 0)
        inner_values(inner, G, &s_in, job, W.v)
        m = <int64_t>job[J_INNER_COUNT]
        na = 0
        nb = 0
        if two:
            for k in range(1, m + 1):
                a = W.v[k]
                if a >= 0.0:
                    W.src[na] = a
                    na += 1
            scan_setup(&S, W.src, na, W.qa, W.ba)
            hit = branch_queries(plus, &s_plus, &S, stop, &mx)
            if not hit:
                for k in range(1, m + 1):
                    a = W.v[k]
                    if a < 0.0:
                        W.src[nb] = -a
                        nb += 1
                if nb:
                    stream_init(&s_minus, seed, scen, grid, i, 2)
                    scan_setup(&S, W.src, nb, W.qb, W.bb)
                    hit = branch_queries(minus, &s_minus, &S, stop, &mx)
        else:
            for k in range(1, m + 1):
                W.src[k - 1] = fabs(W.v[k])
            scan_setup(&S, W.src, m, W.qa, W.ba)
            hit = branch_queries(plus, &s_plus, &S, stop, &mx)
    survived[0] = mx <= job[J_BARRIER]
    maxval[0] = mx


def _threads(nthreads):
    import os
    if nthreads is not None and nthreads > 0:
        return int(nthreads)
    env = os.environ.get("ITERSURV_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def survival_batch(uint64_t seed, uint64_t scenario, uint64_t grid_index,
                   const double[::1] job, const double[::1] plus, const double[::1] minus,
                   const double[::1] inner, const double[::1] ibm_trans,
                   const double[::1] ibm_chol, int64_t start, int64_t stop, nthreads=None):
    """Survival flag and maximum for samples ``start .. stop-1`` of one job."""
    cdef int64_t n = stop - start, i, m
    cdef Proc P, Q, R
    cdef Ibm G
    cdef double *v
    cdef double *qa
    cdef double *qb
    cdef double *src
    cdef int64_t *ba
    cdef int64_t *bb
    cdef int nt = _threads(nthreads)
    if job.shape[0] < J_SIZE or plus.shape[0] < P_SIZE or minus.shape[0] < P_SIZE \
            or inner.shape[0] < P_SIZE:
        raise ValueError("malformed job descriptor")
    out_s = np.zeros(max(n, 0), dtype=np.uint8)
    out_m = np.zeros(max(n, 0), dtype=np.float64)
    if n <= 0:
        return out_s, out_m
    cdef uint8_t[::1] sv = out_s
    cdef double[::1] mv = out_m
    decode_proc(&plus[0], &P)
    decode_proc(&minus[0], &Q)
    decode_proc(&inner[0], &R)
    _ibm_setup(&G, ibm_trans, ibm_chol,
               job[J_INNER_STEP] if job[J_COMPOSE] != 0.0 else job[J_BASE_STEP])
    m = <int64_t>job[J_INNER_COUNT] if job[J_COMPOSE] != 0.0 else 0
    with nogil, parallel(num_threads=nt):
        v = <double *>malloc((m + 2) * sizeof(double))
        qa = <double *>malloc((m + 2) * sizeof(double))
        qb = <double *>malloc((m + 2) * sizeof(double))
        src = <double *>malloc((m + 2) * sizeof(double))
        ba = <int64_t *>malloc((m + 3) * sizeof(int64_t))
        bb = <int64_t *>malloc((m + 3) * sizeof(int64_t))
        for i in prange(n, schedule="dynamic", chunksize=64):
            run_sample(&job[0], &P, &Q, &R, &G, seed, scenario, grid_index,
                       <uint64_t>(start + i), v, qa, qb, src, ba, bb, &sv[i], &mv[i])
        free(v)
        free(qa)
        free(qb)
        free(src)
        free(ba)
        free(bb)
    return out_s, out_m


def inner_extrema_batch(uint64_t seed, uint64_t scenario, uint64_t grid_index,
                        const double[::1] job, const double[::1] inner,
                        const double[::1] ibm_trans, const double[::1] ibm_chol,
                        int64_t start, int64_t stop, nthreads=None):
    """``(max, min)`` of the inner path (channel 0) for each sample, origin included."""
    cdef int64_t n = stop - start, i
    cdef Proc R
    cdef Ibm G
    cdef int nt = _threads(nthreads)
    hi = np.zeros(max(n, 0))
    lo = np.zeros(max(n, 0))
    if n <= 0:
        return hi, lo
    cdef double[::1] hv = hi
    cdef double[::1] lv = lo
    decode_proc(&inner[0], &R)
    _ibm_setup(&G, ibm_trans, ibm_chol, job[J_INNER_STEP])
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        extrema_one(&R, &G, &job[0], seed, scenario, grid_index, <uint64_t>(start + i),
                    &hv[i], &lv[i])
    return hi, lo


cdef void extrema_one(const Proc *R, const Ibm *G, const double *job, uint64_t seed,
                      uint64_t scen, uint64_t grid, uint64_t i, double *hi,
                      double *lo) noexcept nogil:
    cdef Stream s
    stream_init(&s, seed, scen, grid, i, 0)
    inner_extrema(R, G, &s, job, hi, lo)


# ---------------------------------------------------------------------------
# raw draws


def raw_draws(uint64_t k0, uint64_t k1, uint64_t start, int64_t n):
    """Draws ``start .. start+n-1`` of the stream with key ``(k0, k1)``."""
    cdef Stream s
    cdef int64_t i
    out = np.empty(max(n, 0), dtype=np.uint64)
    cdef uint64_t[::1] o = out
    s.k0 = k0
    s.k1 = k1
    s.blk0 = <uint64_t>(-1)
    s.blk1 = <uint64_t>(-1)
    s.mru = 0
    for i in range(n):
        o[i] = draw(&s, start + <uint64_t>i)
    return out


def stream_key(uint64_t seed, uint64_t scenario, uint64_t grid_index, uint64_t sample,
               uint64_t channel):
    cdef Stream s
    stream_init(&s, seed, scenario, grid_index, sample, channel)
    return int(s.k0), int(s.k1)


def normals_batch(uint64_t seed, uint64_t scenario, uint64_t grid_index,
                  const int64_t[::1] samples, uint64_t channel, uint64_t offset, int64_t n,
                  nthreads=None):
    """Normals ``offset .. offset+n-1`` of the listed samples' streams, one row each."""
    cdef int64_t rows = samples.shape[0], i
    cdef int nt = _threads(nthreads)
    out = np.empty((rows, max(n, 0)))
    if rows == 0 or n <= 0:
        return out
    cdef double[:, ::1] o = out
    for i in prange(rows, nogil=True, num_threads=nt, schedule="static"):
        normals_row(seed, scenario, grid_index, <uint64_t>samples[i], channel, offset, n,
                    &o[i, 0])
    return out


cdef void normals_row(uint64_t seed, uint64_t scen, uint64_t grid, uint64_t i, uint64_t channel,
                      uint64_t offset, int64_t n, double *row) noexcept nogil:
    cdef Stream s
    cdef int64_t j
    stream_init(&s, seed, scen, grid, i, channel)
    for j in range(n):
        row[j] = normal(&s, offset + <uint64_t>j)


def ndtri(const double[::1] p):
    """Inverse standard normal distribution function (for cross-checks)."""
    cdef int64_t i
    out = np.empty(p.shape[0])
    cdef double[::1] o = out
    for i in range(p.shape[0]):
        o[i] = itersurv_ndtri(p[i])
    return out


# ---------------------------------------------------------------------------
# probes


cdef inline double tube_stay(double x, double y, double t, double lower, double upper) noexcept nogil:
    """Probability a Brownian bridge from x to y over time t stays in (lower, upper)."""
    cdef double w = upper - lower, s = 0.0, kw
    cdef int k, terms = 3 + <int>ceil(2.0 * sqrt(t) / w)
    for k in range(-terms, terms + 1):
        kw = k * w
        s += exp(-2.0 * kw * (kw + y - x) / t)
        s -= exp(-2.0 * (kw + upper - x) * (kw + upper - y) / t)
    if s < 0.0:
        return 0.0
    if s > 1.0:
        return 1.0
    return s


cdef double NEGLIGIBLE = 46.0  # exp(-46) ~ 1e-20, far below the smallest open uniform


cdef inline int bridge_exits(double x, double y, double t, double eps, double u) noexcept nogil:
    """Whether the bridge from x to y leaves (-eps, eps), given the cell's uniform u."""
    cdef double up = 2.0 * (eps - x) * (eps - y) / t
    cdef double dn = 2.0 * (eps + x) * (eps + y) / t
    if up > NEGLIGIBLE and dn > NEGLIGIBLE:
        return 0
    return u < 1.0 - tube_stay(x, y, t, -eps, eps)


cdef void smalldev_one(const Proc *P, const Ibm *G, uint64_t seed, uint64_t scen,
                       uint64_t grid, uint64_t i, int64_t count, const double *eps,
                       int64_t ne, int bridge, uint8_t *row) noexcept nogil:
    cdef Stream s
    cdef double state[MAX_ORDER]
    cdef double h = 1.0 / <double>count, x = 0.0, y, sup, u = 0.5
    cdef double t = P.sigma * P.sigma * h
    cdef int64_t k, j, alive = ne
    cdef uint64_t jidx = 0
    cdef int use_bridge = bridge and P.kind == K_LEVY and t > 0.0
    stream_init(&s, seed, scen, grid, i, 0)
    for j in range(ne):
        row[j] = 1
    for j in range(G.n):
        state[j] = 0.0
    for k in range(count):
        if P.kind == K_IBM:
            y = ibm_step(G, &s, <uint64_t>k, state)
        else:
            y = levy_cell(P, &s, <uint64_t>k, h, &jidx, x, 0, &sup)
        if use_bridge:
            u = uopen(draw(&s, 4 * <uint64_t>k + 2))
        # levels are increasing, so the survivors are always a suffix
        for j in range(ne - alive, ne):
            if fabs(y) > eps[j] or (use_bridge and bridge_exits(x, y, t, eps[j], u)):
                row[j] = 0
                alive = ne - j - 1
            else:
                break
        x = y
        if alive == 0:
            return


def smalldev_batch(uint64_t seed, uint64_t scenario, uint64_t grid_index,
                   const double[::1] proc, int64_t count, const double[::1] eps,
                   const double[::1] ibm_trans, const double[::1] ibm_chol, int bridge,
                   int64_t start, int64_t stop, nthreads=None):
    """Flags ``sup_{[0,1]} |Y| <= eps_j`` for each sample (rows) and level (columns).

    ``eps`` must be increasing.  Brownian paths (Levy descriptor, no jumps)
    use the cell layout of Levy paths and, with ``bridge``, kill a cell
    when its uniform falls below the probability that the bridge between
    the cell's endpoints leaves the band; other processes are monitored on
    the grid only.
    """
    cdef int64_t n = stop - start, i, ne = eps.shape[0]
    cdef Proc P
    cdef Ibm G
    cdef int nt = _threads(nthreads)
    out = np.zeros((max(n, 0), ne), dtype=np.uint8)
    if n <= 0 or ne == 0:
        return out
    cdef uint8_t[:, ::1] o = out
    decode_proc(&proc[0], &P)
    _ibm_setup(&G, ibm_trans, ibm_chol, 1.0 / <double>count)
    for i in prange(n, nogil=True, num_threads=nt, schedule="dynamic", chunksize=64):
        smalldev_one(&P, &G, seed, scenario, grid_index, <uint64_t>(start + i), count,
                     &eps[0], ne, bridge, &o[i, 0])
    return out


cdef double supabs_one(const Proc *P, const Ibm *G, uint64_t seed, uint64_t scen,
                       uint64_t grid, uint64_t i, int64_t count) noexcept nogil:
    cdef Stream s
    cdef double state[MAX_ORDER]
    cdef double h = 1.0 / <double>count, x = 0.0, sup, best = 0.0
    cdef int64_t k
    cdef uint64_t jidx = 0
    stream_init(&s, seed, scen, grid, i, 0)
    for k in range(G.n):
        state[k] = 0.0
    for k in range(count):
        if P.kind == K_IBM:
            x = ibm_step(G, &s, <uint64_t>k, state)
        else:
            x = levy_cell(P, &s, <uint64_t>k, h, &jidx, x, 0, &sup)
        if fabs(x) > best:
            best = fabs(x)
    return best


def supabs_batch(uint64_t seed, uint64_t scenario, uint64_t grid_index,
                 const double[::1] proc, int64_t count, const double[::1] ibm_trans,
                 const double[::1] ibm_chol, int64_t start, int64_t stop, nthreads=None):
    """Grid maximum of ``|Y|`` over ``[0, 1]`` for each sample (channel 0)."""
    cdef int64_t n = stop - start, i
    cdef Proc P
    cdef Ibm G
    cdef int nt = _threads(nthreads)
    out = np.zeros(max(n, 0))
    if n <= 0:
        return out
    cdef double[::1] o = out
    decode_proc(&proc[0], &P)
    _ibm_setup(&G, ibm_trans, ibm_chol, 1.0 / <double>count)
    for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
        o[i] = supabs_one(&P, &G, seed, scenario, grid_index, <uint64_t>(start + i), count)
    return out


cdef int _ibm_setup(Ibm *G, const double[::1] trans, const double[::1] chol, double h) except -1:
    G.n = <int>sqrt(<double>trans.shape[0] + 0.5) if trans.shape[0] else 1
    if G.n > MAX_ORDER:
        raise ValueError(f"integrated Brownian motion order above {MAX_ORDER - 1}")
    if G.n > 1 and (trans.shape[0] != G.n * G.n or chol.shape[0] != G.n * G.n):
        raise ValueError("IBM matrices must be square and of equal size")
    G.h = h
    G.trans = &trans[0] if trans.shape[0] else NULL
    G.chol = &chol[0] if chol.shape[0] else NULL
    return 0


cdef int rw_stays_below(const Law *L, Stream *s, int64_t steps, double level) noexcept nogil:
    """Whether ``max_{1<=k<=steps} S_k <= level``."""
    cdef int64_t k = 0, b, nbits
    cdef double x = 0.0
    cdef uint64_t word
    if L.code == L_RADEMACHER:
        # whole words while the walk cannot reach the level inside one
        while k < steps:
            if (k & 63) == 0 and k + 64 <= steps and x + 64.0 <= level:
                word = draw(s, <uint64_t>(k >> 6))
                x += 2.0 * itersurv_popcount(word) - 64.0
                k += 64
                continue
            x += rw_inc(L, s, <uint64_t>k)
            k += 1
            if x > level:
                return 0
        return 1
    for k in range(steps):
        x += rw_inc(L, s, <uint64_t>k)
        if x > level:
            return 0
    return 1


def rw_max_batch(uint64_t seed, uint64_t scenario, uint64_t grid_index, const double[::1] law,
                 int64_t steps, double level, int64_t start, int64_t stop, nthreads=None):
    """Flags ``max_{1<=k<=steps} S_k <= level`` per sample (walk on channel 0)."""
    cdef int64_t n = stop - start, i
    cdef Law L
    cdef int nt = _threads(nthreads)
    out = np.zeros(max(n, 0), dtype=np.uint8)
    if n <= 0:
        return out
    cdef uint8_t[::1] o = out
    L.code = <int>law[0]
    L.a = law[1]
    L.b = law[2]
    L.c = law[3]
    L.draws = 0 if L.code == L_CONSTANT else (2 if L.code == L_WEIBULL else 1)
    for i in prange(n, nogil=True, num_threads=nt, schedule="dynamic", chunksize=16):
        o[i] = rw_max_one(&L, seed, scenario, grid_index, <uint64_t>(start + i), steps, level)
    return out


cdef uint8_t rw_max_one(const Law *L, uint64_t seed, uint64_t scen, uint64_t grid, uint64_t i,
                        int64_t steps, double level) noexcept nogil:
    cdef Stream s
    stream_init(&s, seed, scen, grid, i, 0)
    return <uint8_t>rw_stays_below(L, &s, steps, level)


def ladder_batch(uint64_t seed, uint64_t scenario, uint64_t grid_index, const double[::1] law,
                 int64_t cap, int64_t start, int64_t stop, nthreads=None):
    """First strict ascending ladder height per sample; NaN when none within ``cap`` steps."""
    cdef int64_t n = stop - start, i
    cdef Law L
    cdef int nt = _threads(nthreads)
    out = np.empty(max(n, 0))
    if n <= 0:
        return out
    cdef double[::1] o = out
    L.code = <int>law[0]
    L.a = law[1]
    L.b = law[2]
    L.c = law[3]
    L.draws = 0 if L.code == L_CONSTANT else (2 if L.code == L_WEIBULL else 1)
    for i in prange(n, nogil=True, num_threads=nt, schedule="dynamic", chunksize=16):
        o[i] = ladder_one(&L, seed, scenario, grid_index, <uint64_t>(start + i), cap)
    return out


cdef double ladder_one(const Law *L, uint64_t seed, uint64_t scen, uint64_t grid, uint64_t i,
                       int64_t cap) noexcept nogil:
    cdef Stream s
    cdef double x = 0.0
    cdef int64_t k
    stream_init(&s, seed, scen, grid, i, 0)
    for k in range(cap):
        x += rw_inc(L, &s, <uint64_t>k)
        if x > 0.0:
            return x
    return NAN
