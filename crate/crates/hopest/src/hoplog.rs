//! Per-tick trial recordings and their CSV form.
//!
//! One row per estimator tick. True state, both raw accelerometer channels,
//! the estimator's view, and the control command all live side by side so a
//! recorded trial can be replayed through a different estimator
//! configuration later. The `phase` column is the true phase; `event` is
//! what the phase estimator detected on that tick.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{Phase, Transition};

pub const CSV_HEADER: &str =
    "t,z_true,v_true,a_true,a_lowg,a_highg,a_world_est,phase,event,z_est,v_est,P00,P01,P11,twr,h_desired";

/// One estimator tick of a recorded trial. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRow {
    pub t: f64,
    /// True CM height, m.
    pub z_true: f64,
    /// True CM velocity, m/s.
    pub v_true: f64,
    /// True body acceleration, m/s².
    pub a_true: f64,
    /// Low-range accelerometer reading (specific force), m/s².
    pub a_lowg: f64,
    /// High-range accelerometer reading (specific force), m/s².
    pub a_highg: f64,
    /// Filtered, range-selected, gravity-compensated acceleration fed to the
    /// state filter this tick, m/s².
    pub a_world_est: f64,
    /// True phase.
    pub phase: Phase,
    /// Transition the phase estimator detected this tick, if any.
    pub event: Option<Transition>,
    pub z_est: f64,
    pub v_est: f64,
    #[serde(rename = "P00")]
    pub p00: f64,
    #[serde(rename = "P01")]
    pub p01: f64,
    #[serde(rename = "P11")]
    pub p11: f64,
    /// Thrust-to-weight command in force at this tick.
    pub twr: f64,
    /// Commanded apex height, m.
    pub h_desired: f64,
}

/// A complete recorded trial.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HopLog {
    pub rows: Vec<TickRow>,
}

impl HopLog {
    pub fn new(rows: Vec<TickRow>) -> Self {
        HopLog { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Tick period from the first two rows, s.
    pub fn dt(&self) -> Result<f64> {
        if self.rows.len() < 2 {
            return Err(Error::data("log too short to determine tick period"));
        }
        let dt = self.rows[1].t - self.rows[0].t;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::data(format!("non-increasing log timestamps (dt = {dt})")));
        }
        Ok(dt)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wtr.serialize(row).map_err(|e| Error::data(format!("csv write: {e}")))?;
        }
        wtr.flush().map_err(|e| Error::data(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<HopLog> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            let row: TickRow = rec.map_err(|e| Error::data(format!("csv read: {e}")))?;
            rows.push(row);
        }
        Ok(HopLog { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path)
            .map_err(|e| Error::data(format!("create {}: {e}", path.display())))?;
        self.write_csv(f)
    }

    pub fn load(path: &Path) -> Result<HopLog> {
        let f =
            File::open(path).map_err(|e| Error::data(format!("open {}: {e}", path.display())))?;
        Self::read_csv(f)
    }

    /// Number of true hop apexes in the recording.
    pub fn true_ha_count(&self) -> usize {
        detect_true_transitions(self)
            .iter()
            .filter(|tr| tr.kind == Transition::Ha)
            .count()
    }
}

/// A transition recovered from the true-phase column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueTransition {
    pub kind: Transition,
    /// Index of the first row inside the new phase.
    pub row: usize,
    pub t: f64,
    /// True CM height at that row, m.
    pub z: f64,
    /// True CM velocity at that row, m/s.
    pub v: f64,
}

fn cycle_successor(p: Phase) -> (Phase, Transition) {
    match p {
        Phase::Drop => (Phase::StanceDown, Transition::Td),
        Phase::StanceDown => (Phase::StanceUp, Transition::Ms),
        Phase::StanceUp => (Phase::Rebound, Transition::Lo),
        Phase::Rebound => (Phase::Drop, Transition::Ha),
    }
}

/// Recovers the true transition sequence from phase-column edges.
///
/// At low tick rates a short phase can fall entirely between two rows; the
/// walk from the previous phase to the current one then emits every skipped
/// transition at the same row, preserving cycle order.
pub fn detect_true_transitions(log: &HopLog) -> Vec<TrueTransition> {
    let mut out = Vec::new();
    let mut prev = match log.rows.first() {
        Some(r) => r.phase,
        None => return out,
    };
    for (i, row) in log.rows.iter().enumerate().skip(1) {
        let mut at = prev;
        while at != row.phase {
            let (next, kind) = cycle_successor(at);
            out.push(TrueTransition { kind, row: i, t: row.t, z: row.z_true, v: row.v_true });
            at = next;
        }
        prev = row.phase;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, phase: Phase) -> TickRow {
        TickRow {
            t,
            z_true: 1.0 + t,
            v_true: -t,
            a_true: -9.81,
            a_lowg: 0.01,
            a_highg: 0.02,
            a_world_est: -9.8,
            phase,
            event: None,
            z_est: 1.0,
            v_est: 0.0,
            p00: 5.82e-6,
            p01: 7.74e-6,
            p11: 1.441e-5,
            twr: 0.0,
            h_desired: 1.0,
        }
    }

    #[test]
    fn csv_header_is_exact() {
        let log = HopLog::new(vec![row(0.0, Phase::Drop)]);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    }

    #[test]
    fn csv_round_trips_bitwise() {
        let mut r0 = row(0.0, Phase::Drop);
        r0.z_true = 0.1 + 0.2; // not exactly 0.3
        r0.event = Some(Transition::Td);
        let mut r1 = row(1.0 / 840.0, Phase::StanceDown);
        r1.v_est = -3.2768e-3;
        let log = HopLog::new(vec![r0, r1]);

        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = HopLog::read_csv(buf.as_slice()).unwrap();
        assert_eq!(log, back);
    }

    #[test]
    fn phase_and_event_labels() {
        let mut r = row(0.0, Phase::StanceUp);
        r.event = Some(Transition::Lo);
        let log = HopLog::new(vec![r]);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",stance_up,LO,"));
    }

    #[test]
    fn empty_event_field_reads_as_none() {
        let text = format!("{CSV_HEADER}\n0,1,0,-9.81,0,0,-9.81,drop,,1,0,0,0,0,0,1\n");
        let log = HopLog::read_csv(text.as_bytes()).unwrap();
        assert_eq!(log.rows[0].event, None);
        assert_eq!(log.rows[0].phase, Phase::Drop);
    }

    #[test]
    fn malformed_csv_is_a_data_error() {
        let text = format!("{CSV_HEADER}\n0,1,abc\n");
        let err = HopLog::read_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn transitions_from_phase_edges() {
        let phases = [
            Phase::Drop,
            Phase::Drop,
            Phase::StanceDown,
            Phase::StanceDown,
            Phase::StanceUp,
            Phase::Rebound,
            Phase::Rebound,
            Phase::Drop,
        ];
        let log = HopLog::new(
            phases.iter().enumerate().map(|(i, &p)| row(i as f64 * 0.01, p)).collect(),
        );
        let trs = detect_true_transitions(&log);
        let kinds: Vec<Transition> = trs.iter().map(|t| t.kind).collect();
        assert_eq!(kinds, vec![Transition::Td, Transition::Ms, Transition::Lo, Transition::Ha]);
        assert_eq!(trs[0].row, 2);
        assert_eq!(trs[3].row, 7);
        assert_eq!(log.true_ha_count(), 1);
    }

    #[test]
    fn skipped_phases_emit_intermediate_transitions() {
        // Coarse sampling jumped straight from drop to rebound: TD, MS, and
        // LO all land on the same row.
        let log = HopLog::new(vec![row(0.0, Phase::Drop), row(0.1, Phase::Rebound)]);
        let trs = detect_true_transitions(&log);
        let kinds: Vec<Transition> = trs.iter().map(|t| t.kind).collect();
        assert_eq!(kinds, vec![Transition::Td, Transition::Ms, Transition::Lo]);
        assert!(trs.iter().all(|t| t.row == 1));
    }

    #[test]
    fn dt_requires_increasing_time() {
        let log = HopLog::new(vec![row(0.0, Phase::Drop), row(0.0, Phase::Drop)]);
        assert!(log.dt().is_err());
        let log = HopLog::new(vec![row(0.0, Phase::Drop), row(0.5, Phase::Drop)]);
        assert_eq!(log.dt().unwrap(), 0.5);
    }
}
