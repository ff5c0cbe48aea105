use hopest::dynamics::RobotParams;
use hopest::filter::FilterKind;
use hopest::hoplog::HopLog;
use hopest::params::EstimatorParams;
use hopest::phase::PhaseConfig;
use hopest::replay::replay_log;

fn main() {
    let log = HopLog::read_csv(std::path::Path::new("/tmp/clitest/ds3/h30_s68/log_000.csv")).unwrap();
    let text = std::fs::read_to_string("/tmp/clitest/tr_ds3/best_params.json").unwrap();
    let params: EstimatorParams = serde_json::from_str(&text).unwrap();
    let ests = replay_log(FilterKind::Kf1, &params, &PhaseConfig::default(), &RobotParams::default(), &log).unwrap();
    for (i, e) in ests.iter().enumerate() {
        if e.event.map(|t| format!("{t:?}")) == Some("Lo".to_string()) && log.rows[i].t > 1.0 && log.rows[i].t < 6.0 {
            for j in i.saturating_sub(2)..(i + 3).min(ests.len()) {
                let r = &log.rows[j];
                let q = &ests[j];
                println!(
                    "t={:.4} ev={:?} z_true={:+.3} v_true={:+.3} | z_est={:+.3} v_est={:+.3} twr={:.3}",
                    r.t, q.event, r.z_true, r.v_true, q.z, q.v, r.twr
                );
            }
            println!();
        }
    }
}
