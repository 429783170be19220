//! Hand-specified instances for tests and examples.

use crate::network::{NetworkConfig, NetworkInstance, Positions};

/// Builds a validated instance with explicit gains.
///
/// * `user_gains[f][m][b][n]` as in [`NetworkInstance::g_user`];
/// * `eave_gains[b][e][n]` used for both the true and estimated tables.
///
/// All nodes are placed 1 m from every BS so the CSI error bound in gain
/// units equals `epsilon`.
pub fn instance(
    user_gains: Vec<Vec<Vec<Vec<f64>>>>,
    eave_gains: Vec<Vec<Vec<f64>>>,
    p_max: Vec<f64>,
    sigma2: f64,
    ell: usize,
) -> NetworkInstance {
    let f_count = user_gains.len();
    let n_count = user_gains[0][0][0].len();
    let e_count = eave_gains.first().map_or(0, |t| t.len());
    let users_per_bs: Vec<usize> = user_gains.iter().map(|c| c.len()).collect();
    let ell = ell.min(users_per_bs.iter().copied().max().unwrap_or(1)).max(1);
    let config = NetworkConfig {
        bs_count: f_count,
        users_per_bs: users_per_bs.clone(),
        eavesdroppers: e_count,
        subcarriers: n_count,
        ell,
        p_max,
        sigma2,
        alpha: 4.0,
        r_mbs: 1.0,
        r_sbs: 1.0,
        epsilon: 0.0,
        seed: 0,
    };
    let positions = Positions {
        bs: vec![[0.0, 0.0]; f_count],
        users: users_per_bs.iter().map(|&m| vec![[0.0, 0.0]; m]).collect(),
        eavesdroppers: vec![[0.0, 0.0]; e_count],
    };
    let eave = if e_count == 0 {
        vec![vec![]; f_count]
    } else {
        eave_gains
    };
    NetworkInstance::from_parts(config, positions, user_gains, eave.clone(), eave)
        .expect("fixture instance is valid")
}

/// Single-BS instance: `h[m][n]` user gains, `he[e][n]` eavesdropper gains.
pub fn single_cell(h: Vec<Vec<f64>>, he: Vec<Vec<f64>>, p_max: f64, sigma2: f64, ell: usize) -> NetworkInstance {
    let users = h.into_iter().map(|row| vec![row]).collect();
    instance(vec![users], vec![he], vec![p_max], sigma2, ell)
}
