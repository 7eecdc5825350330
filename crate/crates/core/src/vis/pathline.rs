//! RK4 pathline tracing over a temporal sequence of vector volumes.
//!
//! The tracer integrates in a pseudo-time that always increases along the
//! sequence; a reversed window therefore traces backward in simulation
//! time using the very same stage arithmetic. Sequence elements are
//! materialized (decoded) on demand with at most two grids resident.

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::volume::{sample_trilinear_clamped, GridVolume};
use crate::{real, Real};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// A time-ordered sequence of vector volumes (a temporal window view).
/// `sim_time` may decrease along the index for reversed views; any value
/// negation is applied inside `materialize`.
pub trait VolumeSequence<T: Real> {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn sim_time(&self, i: usize) -> f64;
    fn channels(&self) -> usize;
    fn domain(&self) -> Aabb<T>;
    fn materialize(&self, i: usize) -> Result<Arc<GridVolume<T>>>;
}

/// A plain in-memory sequence (steady windows, analytic snapshots).
pub struct GridSequence<T> {
    pub grids: Vec<Arc<GridVolume<T>>>,
    pub times: Vec<f64>,
}

impl<T: Real> VolumeSequence<T> for GridSequence<T> {
    fn len(&self) -> usize {
        self.grids.len()
    }
    fn sim_time(&self, i: usize) -> f64 {
        self.times[i]
    }
    fn channels(&self) -> usize {
        self.grids[0].channels()
    }
    fn domain(&self) -> Aabb<T> {
        self.grids[0].bounds()
    }
    fn materialize(&self, i: usize) -> Result<Arc<GridVolume<T>>> {
        Ok(self.grids[i].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    WindowExhausted,
    OutOfDomain,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct PathVertex<T> {
    pub pos: Vec3<T>,
    /// Simulation time (decreasing for backward traces).
    pub time: f64,
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct Pathline<T> {
    pub seed_id: usize,
    pub vertices: Vec<PathVertex<T>>,
    pub termination: Termination,
}

impl<T: Real> Pathline<T> {
    pub fn endpoint(&self) -> Vec3<T> {
        self.vertices.last().unwrap().pos
    }
}

#[derive(Debug)]
pub struct TraceReport<T> {
    pub pathlines: Vec<Pathline<T>>,
    /// Peak number of simultaneously materialized grids.
    pub max_resident_grids: usize,
    pub materialize_calls: usize,
}

/// Classical RK4 with a time-dependent velocity source. Returns `None`
/// when any stage position leaves the domain (a termination signal, not an
/// error).
pub fn rk4_step<T: Real>(
    velocity: &mut impl FnMut(Vec3<T>, T) -> Option<Vec3<T>>,
    p: Vec3<T>,
    t: T,
    dt: T,
) -> Option<Vec3<T>> {
    let half = dt * real(0.5);
    let k1 = velocity(p, t)?;
    let k2 = velocity(p + k1.scale(half), t + half)?;
    let k3 = velocity(p + k2.scale(half), t + half)?;
    let k4 = velocity(p + k3.scale(dt), t + dt)?;
    let two = real::<T>(2.0);
    let sum = k1 + k2.scale(two) + k3.scale(two) + k4;
    Some(p + sum.scale(dt / real(6.0)))
}

/// Keeps at most two decoded sequence elements resident and interpolates
/// velocities linearly in pseudo-time between them.
pub struct SequenceCursor<'a, T: Real> {
    seq: &'a dyn VolumeSequence<T>,
    /// Pseudo-times of the elements: `|sim_time(i) - sim_time(0)|`.
    taus: Vec<f64>,
    slots: Vec<(usize, Arc<GridVolume<T>>)>,
    pub max_resident: usize,
    pub materialize_calls: usize,
}

impl<'a, T: Real> SequenceCursor<'a, T> {
    pub fn new(seq: &'a dyn VolumeSequence<T>) -> Result<Self> {
        if seq.is_empty() {
            return Err(Error::config("cannot trace over an empty window"));
        }
        if seq.channels() != 3 {
            return Err(Error::shape("pathline tracing expects vector (3-channel) volumes"));
        }
        let t0 = seq.sim_time(0);
        let taus: Vec<f64> = (0..seq.len()).map(|i| (seq.sim_time(i) - t0).abs()).collect();
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("window times must be strictly monotone"));
        }
        Ok(SequenceCursor {
            seq,
            taus,
            slots: Vec::with_capacity(2),
            max_resident: 0,
            materialize_calls: 0,
        })
    }

    /// Total pseudo-time covered by the sequence.
    pub fn span(&self) -> f64 {
        *self.taus.last().unwrap()
    }

    /// Map pseudo-time back to simulation time.
    pub fn sim_time_at(&self, tau: f64) -> f64 {
        let t0 = self.seq.sim_time(0);
        if self.seq.len() == 1 {
            return t0;
        }
        let sign = if self.seq.sim_time(1) >= t0 { 1.0 } else { -1.0 };
        t0 + sign * tau
    }

    fn grid(&mut self, i: usize) -> Result<Arc<GridVolume<T>>> {
        if let Some((_, g)) = self.slots.iter().find(|(j, _)| *j == i) {
            return Ok(g.clone());
        }
        let g = self.seq.materialize(i)?;
        self.materialize_calls += 1;
        if self.slots.len() == 2 {
            // evict the element farther from the one being loaded
            let d0 = self.slots[0].0.abs_diff(i);
            let d1 = self.slots[1].0.abs_diff(i);
            self.slots.remove(if d0 > d1 { 0 } else { 1 });
        }
        self.slots.push((i, g.clone()));
        self.max_resident = self.max_resident.max(self.slots.len());
        Ok(g)
    }

    /// Velocity at position `p` and pseudo-time `tau`; `None` outside the
    /// spatial domain.
    pub fn velocity(&mut self, p: Vec3<T>, tau: T) -> Result<Option<Vec3<T>>> {
        if !self.seq.domain().contains(p) {
            return Ok(None);
        }
        let tau = tau.to_f64().unwrap();
        let mut out = [T::zero(); 3];
        if self.seq.len() == 1 {
            let g = self.grid(0)?;
            sample_trilinear_clamped(&g, p, &mut out);
            return Ok(Some(Vec3::from_array(out)));
        }
        let i = match self.taus.partition_point(|&t| t <= tau) {
            0 => 0,
            k => (k - 1).min(self.taus.len() - 2),
        };
        let span = self.taus[i + 1] - self.taus[i];
        let s: T = real(((tau - self.taus[i]) / span).clamp(0.0, 1.0));
        let ga = self.grid(i)?;
        let gb = self.grid(i + 1)?;
        let mut va = [T::zero(); 3];
        let mut vb = [T::zero(); 3];
        sample_trilinear_clamped(&ga, p, &mut va);
        sample_trilinear_clamped(&gb, p, &mut vb);
        for c in 0..3 {
            out[c] = va[c] + (vb[c] - va[c]) * s;
        }
        Ok(Some(Vec3::from_array(out)))
    }
}

/// Integrate every seed across the sequence's time span with fixed-step
/// RK4 (the final step is clipped to land exactly on the span).
pub fn trace_pathlines<T: Real>(
    seq: &dyn VolumeSequence<T>,
    seeds: &[Vec3<T>],
    dt: f64,
    max_steps: usize,
) -> Result<TraceReport<T>> {
    if dt <= 0.0 {
        return Err(Error::config("pathline dt must be positive"));
    }
    let mut cursor = SequenceCursor::new(seq)?;
    let span = cursor.span();
    let mut pathlines = Vec::with_capacity(seeds.len());

    for (seed_id, &seed) in seeds.iter().enumerate() {
        let mut vertices = Vec::new();
        let mut p = seed;
        let mut tau = 0.0;
        let mut termination;

        let speed0 = match cursor.velocity(p, real(tau))? {
            Some(v) => v.norm().to_f64().unwrap(),
            None => {
                pathlines.push(Pathline {
                    seed_id,
                    vertices: vec![PathVertex {
                        pos: p,
                        time: cursor.sim_time_at(0.0),
                        speed: 0.0,
                    }],
                    termination: Termination::OutOfDomain,
                });
                continue;
            }
        };
        vertices.push(PathVertex {
            pos: p,
            time: cursor.sim_time_at(0.0),
            speed: speed0,
        });

        loop {
            if tau >= span {
                termination = Termination::WindowExhausted;
                break;
            }
            if vertices.len() - 1 >= max_steps {
                termination = Termination::MaxSteps;
                break;
            }
            let step = dt.min(span - tau);
            let mut vel = |q: Vec3<T>, t: T| cursor.velocity(q, t).ok().flatten();
            match rk4_step(&mut vel, p, real(tau), real(step)) {
                Some(next) => {
                    if !seq.domain().contains(next) {
                        termination = Termination::OutOfDomain;
                        break;
                    }
                    p = next;
                    tau += step;
                    let speed = cursor
                        .velocity(p, real(tau))?
                        .map(|v| v.norm().to_f64().unwrap())
                        .unwrap_or(0.0);
                    vertices.push(PathVertex {
                        pos: p,
                        time: cursor.sim_time_at(tau),
                        speed,
                    });
                }
                None => {
                    termination = Termination::OutOfDomain;
                    break;
                }
            }
        }

        pathlines.push(Pathline {
            seed_id,
            vertices,
            termination,
        });
    }

    Ok(TraceReport {
        pathlines,
        max_resident_grids: cursor.max_resident,
        materialize_calls: cursor.materialize_calls,
    })
}

/// CSV vertex table: `seed_id,step,x,y,z,t,vmag`.
pub fn write_pathlines_csv<T: Real>(path: &Path, pathlines: &[Pathline<T>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "seed_id,step,x,y,z,t,vmag")?;
    for line in pathlines {
        for (step, v) in line.vertices.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                line.seed_id,
                step,
                v.pos.x.to_f64().unwrap(),
                v.pos.y.to_f64().unwrap(),
                v.pos.z.to_f64().unwrap(),
                v.time,
                v.speed
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TraceSummary {
    pub num_seeds: usize,
    pub dt: f64,
    pub window_exhausted: usize,
    pub out_of_domain: usize,
    pub max_steps: usize,
    pub max_resident_grids: usize,
}

impl TraceSummary {
    pub fn from_report<T: Real>(report: &TraceReport<T>, dt: f64) -> Self {
        let count = |t: Termination| {
            report
                .pathlines
                .iter()
                .filter(|p| p.termination == t)
                .count()
        };
        TraceSummary {
            num_seeds: report.pathlines.len(),
            dt,
            window_exhausted: count(Termination::WindowExhausted),
            out_of_domain: count(Termination::OutOfDomain),
            max_steps: count(Termination::MaxSteps),
            max_resident_grids: report.max_resident_grids,
        }
    }
}

/// JSON summary next to the CSV table.
pub fn write_trace_summary(path: &Path, summary: &TraceSummary) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_vec_pretty(summary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;
    use crate::volume::Mesh;

    fn steady_sequence(v: [f64; 3], n: usize) -> GridSequence<f64> {
        let mesh = Mesh::Uniform {
            origin: vec3(-2.0, -2.0, -2.0),
            spacing: vec3(0.5, 0.5, 0.5),
        };
        let grid = Arc::new(
            GridVolume::from_fn([9, 9, 9], mesh, 3, |_, out| {
                out.copy_from_slice(&v);
            })
            .unwrap(),
        );
        GridSequence {
            grids: (0..n).map(|_| grid.clone()).collect(),
            times: (0..n).map(|i| i as f64 * 0.25).collect(),
        }
    }

    #[test]
    fn rk4_is_exact_for_constant_fields() {
        let mut vel = |_: Vec3<f64>, _: f64| Some(vec3(1.0, 0.0, 0.0));
        let p = rk4_step(&mut vel, vec3(0.0, 0.0, 0.0), 0.0, 0.1).unwrap();
        assert!((p.x - 0.1).abs() < 1e-15);
        assert_eq!(p.y, 0.0);

        let mut zero = |_: Vec3<f64>, _: f64| Some(vec3(0.0, 0.0, 0.0));
        let q = rk4_step(&mut zero, vec3(0.3, 0.4, 0.5), 0.0, 0.7).unwrap();
        assert_eq!(q, vec3(0.3, 0.4, 0.5));
    }

    #[test]
    fn rk4_matches_exponential_to_fifth_order() {
        // x' = x from x=1: after dt, x = e^dt; RK4 error is O(dt^5)
        let mut vel = |p: Vec3<f64>, _: f64| Some(vec3(p.x, 0.0, 0.0));
        let dt = 0.1;
        let p = rk4_step(&mut vel, vec3(1.0, 0.0, 0.0), 0.0, dt).unwrap();
        let exact = dt.exp();
        let err = (p.x - exact).abs();
        assert!(err < dt.powi(5), "error {err}");
        assert!(err > 1e-12, "suspiciously exact");
    }

    #[test]
    fn constant_flow_crosses_the_window() {
        let seq = steady_sequence([1.0, 0.0, 0.0], 5);
        let report = trace_pathlines(&seq, &[vec3(0.0, 0.0, 0.0)], 0.1, 1000).unwrap();
        let line = &report.pathlines[0];
        assert_eq!(line.termination, Termination::WindowExhausted);
        // span = 1.0, so the endpoint is x = 1
        assert!((line.endpoint().x - 1.0).abs() < 1e-12);
        assert!(report.max_resident_grids <= 2);
        // vertex times strictly increase
        assert!(line.vertices.windows(2).all(|w| w[1].time > w[0].time));
    }

    #[test]
    fn out_of_domain_terminates_cleanly() {
        let seq = steady_sequence([10.0, 0.0, 0.0], 3);
        let report = trace_pathlines(&seq, &[vec3(1.5, 0.0, 0.0)], 0.1, 1000).unwrap();
        assert_eq!(report.pathlines[0].termination, Termination::OutOfDomain);
    }

    #[test]
    fn max_steps_terminates() {
        let seq = steady_sequence([0.1, 0.0, 0.0], 5);
        let report = trace_pathlines(&seq, &[vec3(0.0, 0.0, 0.0)], 0.01, 7).unwrap();
        assert_eq!(report.pathlines[0].termination, Termination::MaxSteps);
        assert_eq!(report.pathlines[0].vertices.len(), 8);
    }

    #[test]
    fn empty_and_scalar_windows_are_rejected() {
        let seq = GridSequence::<f64> {
            grids: vec![],
            times: vec![],
        };
        assert!(trace_pathlines(&seq, &[vec3(0.0, 0.0, 0.0)], 0.1, 10).is_err());

        let mesh = Mesh::Uniform {
            origin: vec3(0.0, 0.0, 0.0),
            spacing: vec3(1.0, 1.0, 1.0),
        };
        let scalar = Arc::new(GridVolume::from_fn([2, 2, 2], mesh, 1, |_, o| o[0] = 0.0).unwrap());
        let seq = GridSequence {
            grids: vec![scalar],
            times: vec![0.0],
        };
        assert!(trace_pathlines(&seq, &[vec3(0.5, 0.5, 0.5)], 0.1, 10).is_err());
    }
}
