# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Q-learning and rollout loops; see ``_pykernels`` for the reference."""


cdef inline int _argmax(const double[:, ::1] q, int z) noexcept nogil:
    cdef int best = 0
    cdef int a
    cdef double m = q[z, 0]
    for a in range(1, q.shape[1]):
        if q[z, a] > m:
            m = q[z, a]
            best = a
    return best


cdef inline double _rowmax(const double[:, ::1] q, int z) noexcept nogil:
    cdef int a
    cdef double m = q[z, 0]
    for a in range(1, q.shape[1]):
        if q[z, a] > m:
            m = q[z, a]
    return m


def q_learn(double[:, ::1] q, const int[:, ::1] next_state, const double[:, ::1] reward,
            const int[:, ::1] tokens, const int[::1] start, const int[::1] ep_config,
            const double[::1] eps, const double[:, ::1] r_eps, const signed char[:, ::1] r_act,
            const double[:, ::1] r_force, const int[:, ::1] patterns,
            double p_force, double alpha, double gamma, int horizon):
    cdef Py_ssize_t e, n_ep = ep_config.shape[0]
    cdef int t, s, s2, z, z2, a
    cdef double r, target, eps_e
    with nogil:
        for e in range(n_ep):
            eps_e = eps[e]
            s = start[ep_config[e]]
            z = tokens[s, patterns[e, 0]]
            for t in range(horizon):
                if r_force[e, t] < p_force or r_eps[e, t] < eps_e or z < 0:
                    a = r_act[e, t]
                else:
                    a = _argmax(q, z)
                s2 = next_state[s, a]
                r = reward[s, a]
                z2 = -1
                if s2 < 0:
                    target = r
                else:
                    z2 = tokens[s2, patterns[e, t + 1]]
                    if z2 >= 0:
                        target = r + gamma * _rowmax(q, z2)
                    else:
                        target = r
                if z >= 0:
                    q[z, a] = q[z, a] + alpha * (target - q[z, a])
                if s2 < 0:
                    break
                s = s2
                z = z2


def rollout_returns(const double[:, ::1] q, const int[:, ::1] next_state, const double[:, ::1] reward,
                    const int[:, ::1] tokens, const int[::1] start, const int[::1] ep_config,
                    const signed char[:, ::1] r_act, const double[:, ::1] r_force,
                    const int[:, ::1] patterns, double p_force, double gamma, int horizon,
                    double[::1] out):
    cdef Py_ssize_t e, n_ep = ep_config.shape[0]
    cdef int t, s, s2, z, a
    cdef double g, disc
    with nogil:
        for e in range(n_ep):
            s = start[ep_config[e]]
            g = 0.0
            disc = 1.0
            for t in range(horizon):
                z = tokens[s, patterns[e, t]]
                if r_force[e, t] < p_force or z < 0:
                    a = r_act[e, t]
                else:
                    a = _argmax(q, z)
                s2 = next_state[s, a]
                g = g + disc * reward[s, a]
                disc = disc * gamma
                if s2 < 0:
                    break
                s = s2
            out[e] = g

