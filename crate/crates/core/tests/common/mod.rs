//! Reference implementations used only by tests. They are built from the
//! Hamiltonian directly and share no code with the library engines.
#![allow(dead_code)]

use num_complex::Complex64;

type State2 = [Complex64; 2];

fn combine(c: State2, terms: &[(f64, &State2)]) -> State2 {
    let mut out = c;
    for (w, k) in terms {
        out[0] += k[0] * *w;
        out[1] += k[1] * *w;
    }
    out
}

/// Adaptive Dormand-Prince 5(4) integration of `dc/dt = f(t, c)` from `t0` to `t1`.
pub fn dopri5(f: impl Fn(f64, State2) -> State2, t0: f64, t1: f64, start: State2, tol: f64) -> State2 {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut t = t0;
    let mut c = start;
    let mut h = ((t1 - t0) / 100.0).max(1e-6);
    while t < t1 {
        h = h.min(t1 - t);
        let mut k = [[Complex64::new(0.0, 0.0); 2]; 7];
        for s in 0..7 {
            let terms: Vec<(f64, &State2)> = (0..s).map(|j| (h * A[s][j], &k[j])).collect();
            let y = combine(c, &terms);
            k[s] = f(t + C[s] * h, y);
        }
        let hi = combine(c, &(0..7).map(|j| (h * B5[j], &k[j])).collect::<Vec<_>>());
        let lo = combine(c, &(0..7).map(|j| (h * B4[j], &k[j])).collect::<Vec<_>>());
        let err = (hi[0] - lo[0]).norm().max((hi[1] - lo[1]).norm());
        if err <= tol || h < 1e-12 {
            t += h;
            c = hi;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    c
}

/// Laboratory-frame two-level equations
/// `i dC_m/dt = V exp(-i D t) C_p`, `i dC_p/dt = V exp(i D t) C_m`, `V = -omega/2`.
pub fn ode_two_level(omega: f64, delta: f64, t0: f64, tau: f64, start: State2) -> State2 {
    let v = -0.5 * omega;
    let i = Complex64::i();
    let rhs = |t: f64, c: State2| -> State2 {
        [
            -i * v * Complex64::cis(-delta * t) * c[1],
            -i * v * Complex64::cis(delta * t) * c[0],
        ]
    };
    dopri5(rhs, t0, t0 + tau, start, 1e-14)
}

/// `sigma` of spin `k` in basis index `x`.
pub fn sigma(x: usize, k: usize) -> f64 {
    if x >> k & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// `-1/2 sum w_k s_k - J/2 sum s_k s_(k+1)` with `J = 1`.
pub fn energy(len: usize, omega0: f64, dw: f64, x: usize) -> f64 {
    let zeeman: f64 = (0..len).map(|k| (omega0 + k as f64 * dw) * sigma(x, k)).sum();
    let ising: f64 = (0..len.saturating_sub(1)).map(|k| sigma(x, k) * sigma(x, k + 1)).sum();
    -0.5 * zeeman - 0.5 * ising
}

/// Rotating-frame Hamiltonian, diagonal shifted so the ground entry is zero.
pub fn rotating_hamiltonian(len: usize, omega0: f64, dw: f64, nu: f64, omega: f64) -> faer::Mat<f64> {
    let diag = |x: usize| energy(len, omega0, dw, x) + 0.5 * nu * (0..len).map(|k| sigma(x, k)).sum::<f64>();
    let g = diag(0);
    faer::Mat::from_fn(1 << len, 1 << len, |r, c| {
        if r == c {
            diag(r) - g
        } else if (r ^ c).count_ones() == 1 {
            -0.5 * omega
        } else {
            0.0
        }
    })
}
