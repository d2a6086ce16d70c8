use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BackgroundFeature, DistributionSpec};

/// One sampled binary time series: `tau` rows of `d` features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    tau: usize,
    d: usize,
    values: Vec<u8>,
}

impl Trajectory {
    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let tau = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == d), "ragged trajectory rows");
        Self { tau, d, values: rows.concat() }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, t: usize, j: usize) -> u8 {
        self.values[t * self.d + j]
    }

    pub fn row(&self, t: usize) -> &[u8] {
        &self.values[t * self.d..(t + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.tau).map(|t| self.get(t, j)).collect()
    }

    /// Row `t` packed as a bitmask (feature `j` at bit `j`; requires `d <= 64`).
    pub fn row_mask(&self, t: usize) -> u64 {
        self.row(t).iter().enumerate().fold(0u64, |m, (j, &v)| m | ((v as u64) << j))
    }

    fn set(&mut self, t: usize, j: usize, v: u8) {
        self.values[t * self.d + j] = v;
    }
}

/// Column of a period-1 feature started at `initial`.
pub fn periodic_column(initial: u8, tau: usize) -> Vec<u8> {
    (0..tau).map(|t| initial ^ (t % 2) as u8).collect()
}

/// Draws one trajectory. Randomness is consumed in a fixed order (drivers,
/// noisy copies, background) so a stream always yields the same trajectory.
pub fn sample_trajectory<R: Rng + ?Sized>(spec: &DistributionSpec, rng: &mut R) -> Trajectory {
    let tau = spec.tau();
    let d = spec.d();
    let mut traj = Trajectory { tau, d, values: vec![0; tau * d] };

    for (i, drv) in spec.drivers().iter().enumerate() {
        if let Some(leader) = drv.follows {
            for t in 0..tau {
                let v = traj.get(t, leader);
                traj.set(t, i, v);
            }
            continue;
        }
        if rng.random::<f64>() < drv.activation_prob {
            let start = rng.random_range(0..tau);
            for t in start..tau {
                if t > start && drv.deactivation_prob > 0.0 && rng.random::<f64>() < drv.deactivation_prob {
                    break;
                }
                traj.set(t, i, 1);
            }
        }
    }

    for (j, nf) in spec.noisy().iter().enumerate() {
        let col = spec.noisy_index(j);
        for t in 0..tau {
            let flip = (rng.random::<f64>() < nf.epsilon) as u8;
            let v = traj.get(t, nf.parent) ^ flip;
            traj.set(t, col, v);
        }
    }

    for (j, kind) in spec.background().iter().enumerate() {
        let col = spec.background_index(j);
        match *kind {
            BackgroundFeature::Periodic => {
                let init = rng.random_bool(0.5) as u8;
                for (t, v) in periodic_column(init, tau).into_iter().enumerate() {
                    traj.set(t, col, v);
                }
            }
            BackgroundFeature::MarkovStay(p_stay) => {
                let mut v = rng.random_bool(0.5) as u8;
                for t in 0..tau {
                    if t > 0 && rng.random::<f64>() >= p_stay {
                        v ^= 1;
                    }
                    traj.set(t, col, v);
                }
            }
            BackgroundFeature::IidBernoulli(p) => {
                for t in 0..tau {
                    let v = (rng.random::<f64>() < p) as u8;
                    traj.set(t, col, v);
                }
            }
            BackgroundFeature::TwoState(ts) => {
                let mut v = (rng.random::<f64>() < ts.init) as u8;
                for t in 0..tau {
                    if t > 0 {
                        let p_switch = if v == 0 { ts.p01 } else { ts.p10 };
                        if rng.random::<f64>() < p_switch {
                            v ^= 1;
                        }
                    }
                    traj.set(t, col, v);
                }
            }
        }
    }
    traj
}

/// Long-format CSV: `trajectory,t,x0,..,x{d-1}`, one row per time point.
pub fn write_trajectories_csv<W: Write>(trajectories: &[Trajectory], writer: W) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = trajectories.first().map_or(0, Trajectory::d);
    let mut header = vec!["trajectory".to_string(), "t".into()];
    header.extend((0..d).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (id, tr) in trajectories.iter().enumerate() {
        for t in 0..tr.tau() {
            let mut rec = vec![id.to_string(), t.to_string()];
            rec.extend(tr.row(t).iter().map(u8::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
