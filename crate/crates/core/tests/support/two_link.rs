//! Hand-derived closed-form dynamics of a planar 2-link arm with point masses
//! at the link tips, relative joint angles, gravity along −y.

pub struct TwoLink {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
    pub b: f64,
}

impl TwoLink {
    pub fn accel(&self, q: [f64; 2], qd: [f64; 2], tau: [f64; 2]) -> [f64; 2] {
        let TwoLink { m1, m2, l1, l2, g, b } = *self;
        let c2 = q[1].cos();
        let s2 = q[1].sin();
        let m11 = m1 * l1 * l1 + m2 * (l1 * l1 + 2.0 * l1 * l2 * c2 + l2 * l2);
        let m12 = m2 * (l1 * l2 * c2 + l2 * l2);
        let m22 = m2 * l2 * l2;
        let h = m2 * l1 * l2 * s2;
        let cor1 = -h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]);
        let cor2 = h * qd[0] * qd[0];
        let g1 = (m1 + m2) * g * l1 * q[0].cos() + m2 * g * l2 * (q[0] + q[1]).cos();
        let g2 = m2 * g * l2 * (q[0] + q[1]).cos();
        let r1 = tau[0] - b * qd[0] - cor1 - g1;
        let r2 = tau[1] - b * qd[1] - cor2 - g2;
        let det = m11 * m22 - m12 * m12;
        [(m22 * r1 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det]
    }

    pub fn step(&self, q: [f64; 2], qd: [f64; 2], tau: [f64; 2], dt: f64) -> ([f64; 2], [f64; 2]) {
        let a = self.accel(q, qd, tau);
        let v = [qd[0] + dt * a[0], qd[1] + dt * a[1]];
        ([q[0] + dt * v[0], q[1] + dt * v[1]], v)
    }
}
