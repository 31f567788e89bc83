//! Linear SVM instances (n = 20, D = 5, constant bias feature 1) with the
//! optimal primal objective from an interior-point QP solver.

#![allow(dead_code)]

pub struct QpCase {
    pub c: f64,
    pub objective: f64,
    pub labels: [bool; 20],
    pub features: [[f64; 5]; 20],
}

pub const QP_CASES: [QpCase; 3] = [
    QpCase {
        c: 1.0,
        objective: 3.523304403121,
        labels: [
            true, false, true, false, true, false, true, true, true, true, true, false, false, false, true, true, true,
            true, false, false,
        ],
        features: [
            [0.648, 0.469, -0.643, -1.178, -0.145],
            [1.203, 1.334, 0.908, 0.347, 1.600],
            [1.233, -0.220, -1.062, -0.365, -0.420],
            [0.688, -1.899, -0.191, 1.671, -0.920],
            [-0.758, -0.084, -1.418, -0.130, -0.016],
            [-0.005, -0.989, -0.366, 0.654, -0.715],
            [0.547, 0.656, -1.427, -0.645, 0.655],
            [0.493, 0.179, -0.349, 0.109, 1.875],
            [-0.221, 0.580, -0.417, -0.198, 0.648],
            [-0.929, -0.242, -0.610, -0.859, 0.176],
            [1.240, 0.221, -0.382, -1.451, 0.819],
            [0.210, -0.631, 0.861, 1.574, -1.632],
            [0.590, 0.846, 0.581, 1.602, 0.625],
            [-0.904, 3.800, 0.146, 1.482, 1.966],
            [0.881, -1.798, -1.704, -0.678, 0.034],
            [-1.389, -0.937, -0.445, -0.475, 0.189],
            [0.073, -0.039, -0.618, -0.832, -1.911],
            [1.267, 0.195, 0.370, -1.717, 0.751],
            [-0.088, 0.968, -0.686, 0.998, 1.439],
            [-0.170, -0.305, -0.400, 0.136, 2.740],
        ],
    },
    QpCase {
        c: 0.1,
        objective: 0.812027110780,
        labels: [
            true, true, false, false, false, false, true, false, false, true, false, true, false, true, false, false,
            false, false, false, true,
        ],
        features: [
            [1.017, 0.105, 0.585, 1.173, -0.033],
            [-0.017, 0.447, 2.389, -0.209, -0.417],
            [0.128, 0.755, -0.222, -0.280, 0.834],
            [2.049, 1.358, -1.710, -0.063, 1.360],
            [-1.019, 0.240, 0.743, -1.081, -1.354],
            [-0.788, 1.343, -0.136, 0.249, -0.648],
            [-0.030, -1.976, -0.438, 0.343, -1.594],
            [-0.002, -0.155, 0.822, -2.604, -0.141],
            [0.328, -0.107, 0.333, -1.233, 1.831],
            [1.019, 0.372, 1.229, -0.360, 1.026],
            [-1.059, 1.601, 1.006, -0.890, -0.866],
            [0.630, 0.021, 1.135, -0.010, 0.214],
            [-0.032, 0.056, -0.755, -1.165, 0.581],
            [0.305, -1.565, -0.446, 1.062, 0.006],
            [-1.104, 0.299, -0.900, -0.369, 1.260],
            [-1.691, 0.310, 1.445, 0.305, 0.826],
            [-1.912, -0.551, -0.790, -1.121, -0.196],
            [-0.219, 0.653, -0.801, 0.007, -0.619],
            [0.386, 0.620, -0.078, -0.713, -1.944],
            [0.469, -1.286, 0.931, 0.200, -1.648],
        ],
    },
    QpCase {
        c: 10.0,
        objective: 5.043067385846,
        labels: [
            false, false, true, true, true, false, false, true, true, false, true, true, false, true, false, true,
            true, true, false, true,
        ],
        features: [
            [-0.383, 1.604, -0.447, -1.309, 0.145],
            [-0.007, 0.571, -1.668, -0.406, -1.885],
            [0.572, -0.483, 2.042, -0.012, 0.337],
            [0.993, 1.921, -0.647, 0.866, 1.130],
            [0.470, -0.288, -0.717, 1.169, -0.333],
            [-1.050, -1.273, 1.095, -1.210, -0.287],
            [-0.745, -0.028, -0.701, 0.449, 0.564],
            [0.981, 0.716, -1.759, 1.691, -1.041],
            [-2.587, -0.698, 1.095, 0.647, -0.785],
            [0.831, -0.303, -1.586, -0.498, -0.245],
            [1.246, 0.747, 0.586, 0.077, -2.107],
            [-1.650, 1.622, 0.906, 0.533, 1.766],
            [-1.289, -0.509, 0.057, -0.094, 0.233],
            [0.396, -0.711, 1.062, -0.917, 1.180],
            [-1.525, -0.414, -0.258, -1.118, -0.024],
            [-0.578, 1.719, -0.174, 0.772, -0.142],
            [0.457, -0.281, -0.151, 0.787, -0.180],
            [-0.573, 0.691, 0.266, -0.084, -1.433],
            [0.748, -0.638, -0.900, 0.392, 0.825],
            [0.423, -0.035, 0.817, 0.037, 0.770],
        ],
    },
];
