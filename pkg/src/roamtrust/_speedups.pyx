# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the simulation engine.

Mirrors ``engine._PurePhases`` step for step and draw for draw: it consumes
uniform doubles from the caller's BitGenerator in the documented order, so a
run executed here is bit-identical to the pure-Python fallback. The caller
must hold ``bit_generator.lock`` for the duration of the call.

Fast path only: lazy-walk movement for every robot, Bernoulli observations,
static fabricated disclosure vectors. Everything else stays in Python.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64
ctypedef cnp.uint8_t u8


cdef inline double nextd(bitgen_t *bg) noexcept:
    return bg.next_double(bg.state)


cdef bitgen_t *_bitgen(object bit_generator):
    return <bitgen_t *> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")


cdef inline void _move_all(bitgen_t *bg, i64[::1] pos, f64[:, ::1] cums,
                           i64[:, ::1] dests) noexcept:
    # One uniform per robot in id order, inverted against the self-first
    # cumulative row; the final cell absorbs round-off (cums[s, S-1] == 1.0).
    cdef Py_ssize_t n = pos.shape[0], S = cums.shape[1], r, k
    cdef double u
    cdef i64 s
    for r in range(n):
        u = nextd(bg)
        s = pos[r]
        k = 0
        while k < S - 1 and u >= cums[s, k]:
            k += 1
        pos[r] = dests[s, k]


cdef Py_ssize_t _phase1_wrong(i64[:, ::1] eta, f64[:, ::1] beta, u8[::1] legit,
                              u8[::1] truth, i64 n_alpha) noexcept:
    cdef Py_ssize_t n = legit.shape[0], i, j, wrong = 0
    cdef bint bit
    for i in range(n):
        if not legit[i]:
            continue
        for j in range(n):
            if j == i:
                continue
            bit = eta[i, j] >= n_alpha and beta[i, j] >= 0.0
            if bit != <bint> truth[j]:
                wrong += 1
    return wrong


def run_phase1(object bit_generator, long n_steps, long t0, i64[::1] pos,
               f64[:, ::1] cums, i64[:, ::1] dests, u8[::1] legit,
               f64[::1] p_obs, i64[:, ::1] eta, f64[:, ::1] beta,
               u8[::1] truth, long n_alpha, bint check, bint stop_on_correct):
    """Observation-phase loop; returns (first_correct_global_step or -1,
    steps_executed). Mutates pos/eta/beta in place."""
    cdef bitgen_t *bg = _bitgen(bit_generator)
    cdef Py_ssize_t n = pos.shape[0], i, j
    cdef long step, t
    cdef long first = -1
    cdef double u, val
    cdef i64 si
    for step in range(1, n_steps + 1):
        t = t0 + step
        _move_all(bg, pos, cums, dests)
        for i in range(n):
            if not legit[i]:
                continue
            si = pos[i]
            for j in range(n):
                if j != i and pos[j] == si:
                    u = nextd(bg)
                    val = 1.0 if u < p_obs[j] else 0.0
                    eta[i, j] += 1
                    beta[i, j] += val - 0.5
        if check and first < 0 and _phase1_wrong(eta, beta, legit, truth, n_alpha) == 0:
            first = t
            if stop_on_correct:
                return first, step
    return first, n_steps


cdef Py_ssize_t _fused_wrong(i64[:, ::1] tally, i64[::1] theta, u8[::1] legit,
                             u8[::1] truth) noexcept:
    cdef Py_ssize_t n = legit.shape[0], i, k, wrong = 0
    cdef bint bit
    for i in range(n):
        if not legit[i]:
            continue
        for k in range(n):
            if k == i:
                bit = 1  # owner self-entry pinned to trust
            else:
                bit = 2 * tally[i, k] >= theta[i]
            if bit != <bint> truth[k]:
                wrong += 1
    return wrong


def run_phase2(object bit_generator, long n_steps, long t0, i64[::1] pos,
               f64[:, ::1] cums, i64[:, ::1] dests, u8[::1] legit,
               u8[:, ::1] trusted, u8[:, ::1] supply, i64[:, ::1] tally,
               i64[::1] theta, u8[:, ::1] met2, i64[:, ::1] enc, u8[::1] truth,
               bint check, bint stop_on_correct, bint stop_on_quiescent):
    """Exchange-phase loop; returns (result, steps_executed) where result is
    the first-correct global step, -1 for none, or -2 once every trusted
    robot has been met and the fused vectors are still wrong (no future
    meeting can change them)."""
    cdef bitgen_t *bg = _bitgen(bit_generator)
    cdef Py_ssize_t n = pos.shape[0], i, j, k
    cdef long step, t, wrong
    cdef long first = -1
    cdef long remaining = 0
    cdef i64 si
    for i in range(n):
        if legit[i]:
            for j in range(n):
                if j != i and trusted[i, j] and not met2[i, j]:
                    remaining += 1
    for step in range(1, n_steps + 1):
        t = t0 + step
        _move_all(bg, pos, cums, dests)
        for i in range(n):
            if not legit[i]:
                continue
            si = pos[i]
            for j in range(n):
                if j != i and pos[j] == si:
                    enc[i, j] += 1
                    if not met2[i, j]:
                        met2[i, j] = 1
                        if trusted[i, j]:
                            theta[i] += 1
                            remaining -= 1
                            for k in range(n):
                                tally[i, k] += supply[j, k]
        if check:
            wrong = _fused_wrong(tally, theta, legit, truth)
            if wrong == 0 and first < 0:
                first = t
                if stop_on_correct:
                    return first, step
            if stop_on_quiescent and remaining == 0 and wrong > 0:
                return -2, step
    return first, n_steps
