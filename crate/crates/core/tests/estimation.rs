use bpeq::control::ControllerKind;
use bpeq::estimation::replay::{batches, read_log, write_reading, PROBE_LOG_HEADER};
use bpeq::estimation::{
    density_to_speed, estimate_cell_field, estimate_links, estimate_speed, kernel_weight,
    link_queue, speed_to_density, CellEstimate, CellField, EstimatorParams, ProbeHistory,
    ProbeReading,
};
use bpeq::harness::scenarios::{isolated_demand, isolated_network};
use bpeq::network::{LaneId, LinkId, Network, NetworkDocument};
use bpeq::simulation::{Demand, SimConfig, Simulation};
use proptest::prelude::*;

/// One 500 m single-lane road between two boundary nodes.
fn road() -> Network {
    let doc = NetworkDocument::from_toml(
        "[[links]]\nid = \"a\"\nlength = 500.0\nfrom = \"x\"\nto = \"y\"\nlanes = 1\n",
    )
    .unwrap();
    Network::build(&doc).unwrap()
}

fn reading(vehicle: u64, x: f64, t: f64, speed: f64) -> ProbeReading {
    ProbeReading {
        vehicle,
        lane: LaneId(0),
        x,
        t,
        speed,
    }
}

fn history(batches: &[(f64, Vec<ProbeReading>)]) -> ProbeHistory {
    let mut h = ProbeHistory::new(EstimatorParams::default().horizon);
    for (t, b) in batches {
        h.ingest(*t, b).unwrap();
    }
    h
}

fn densities(field: &CellField) -> Vec<f64> {
    field
        .lane(LaneId(0))
        .unwrap()
        .iter()
        .map(|c| c.density)
        .collect()
}

#[test]
fn no_probes_means_free_flow_everywhere() {
    let net = isolated_network();
    let p = EstimatorParams::default();
    let field = estimate_cell_field(&net, &ProbeHistory::new(p.horizon), 100.0, &p);
    assert_eq!(field.lanes.len(), net.lanes().len());
    for cells in field.lanes.values() {
        assert!(cells
            .iter()
            .all(|c| c.speed == p.free_flow_speed && c.density == 0.0));
    }
}

#[test]
fn stopped_probe_at_stop_line_jams_nearby_cells() {
    let net = road();
    let p = EstimatorParams::default();
    let steps: Vec<_> = (0..=4)
        .map(|k| {
            (
                10.0 * k as f64,
                vec![reading(1, 500.0, 10.0 * k as f64, 0.0)],
            )
        })
        .collect();
    let field = estimate_cell_field(&net, &history(&steps), 40.0, &p);
    let rho = densities(&field);
    assert!((rho[49] - p.jam_density).abs() < 1e-9 * p.jam_density);
    // Only the cell the vehicle occupies is sandwiched; upstream is free.
    assert!(rho[..48].iter().all(|&r| r == 0.0));
}

#[test]
fn queue_between_stopped_probes_is_jammed() {
    let net = road();
    let p = EstimatorParams::default();
    let batch = vec![reading(1, 500.0, 40.0, 0.0), reading(2, 420.0, 40.0, 0.0)];
    let field = estimate_cell_field(&net, &history(&[(40.0, batch)]), 40.0, &p);
    let rho = densities(&field);
    // The span reaches one jam spacing past the upper probe, into the 410-420 m cell.
    for r in &rho[41..] {
        assert!((r - p.jam_density).abs() < 1e-9, "{r}");
    }
    assert!(rho[..41].iter().all(|&r| r == 0.0));
    let q = link_queue(&net, LinkId(0), &field).unwrap();
    assert!((q - 90.0 * p.jam_density).abs() < 1e-9, "{q}");
}

#[test]
fn lane_without_a_fresh_probe_is_free() {
    let net = road();
    let p = EstimatorParams::default();
    let h = history(&[(30.0, vec![reading(1, 490.0, 30.0, 0.0)]), (40.0, vec![])]);
    let field = estimate_cell_field(&net, &h, 40.0, &p);
    assert!(densities(&field).iter().all(|&r| r == 0.0));
}

#[test]
fn sandwiched_cells_match_pointwise_estimate() {
    let net = road();
    let p = EstimatorParams::default();
    let older = vec![reading(1, 300.0, 30.0, 4.0), reading(2, 460.0, 30.0, 1.0)];
    let newer = vec![reading(1, 340.0, 40.0, 6.0), reading(2, 462.0, 40.0, 0.5)];
    let h = history(&[(30.0, older), (40.0, newer)]);
    let field = estimate_cell_field(&net, &h, 40.0, &p);
    let readings = h.window(LaneId(0), 40.0);
    for (cell, est) in net.lanes()[0]
        .cells
        .iter()
        .zip(field.lane(LaneId(0)).unwrap())
    {
        if (340.0..=462.0).contains(&cell.center) {
            let v = estimate_speed(cell.center, 40.0, readings, &p);
            assert!((est.speed - v).abs() <= 1e-12 * v.max(1.0));
            assert_eq!(est.density, speed_to_density(est.speed, &p).unwrap());
        }
    }
}

#[test]
fn uniform_jam_queue_on_500_m() {
    let net = road();
    let p = EstimatorParams::default();
    let mut field = CellField::default();
    field.lanes.insert(
        LaneId(0),
        vec![
            CellEstimate {
                speed: 0.0,
                density: p.jam_density
            };
            50
        ],
    );
    let q = link_queue(&net, LinkId(0), &field).unwrap();
    assert!((q - 71.5).abs() < 1e-9, "{q}");
}

#[test]
fn link_queue_sums_every_lane() {
    let net = isolated_network();
    let link = net.link_by_name("n_in").unwrap();
    let mut field = CellField::default();
    let mut oracle = 0.0;
    for (k, &lane) in net.link(link).lanes.iter().enumerate() {
        let cells = &net.lane(lane).cells;
        let est: Vec<CellEstimate> = (0..cells.len())
            .map(|i| CellEstimate {
                speed: 0.0,
                density: 1e-3 * ((i * 7 + k * 13) % 143) as f64,
            })
            .collect();
        oracle += cells
            .iter()
            .zip(&est)
            .map(|(c, e)| e.density * c.length)
            .sum::<f64>();
        field.lanes.insert(lane, est);
    }
    assert_eq!(link_queue(&net, link, &field).unwrap(), oracle);

    field.lanes.clear();
    assert!(link_queue(&net, link, &field).is_err());
}

#[test]
fn thirty_kmh_density() {
    let p = EstimatorParams::default();
    let rho = speed_to_density(30.0 / 3.6, &p).unwrap() * 1000.0;
    assert!((rho - 143.0 / (1.0 + 2.4 * 2f64.ln())).abs() < 1e-9);
    assert!((rho - 53.7).abs() < 0.05);
}

/// Mean speed of the vehicles inside each occupied cell versus the estimate,
/// over a signalized approach in stop-and-go traffic with every vehicle reporting.
#[test]
fn full_penetration_field_tracks_true_speeds() {
    let net = isolated_network();
    let demand = Demand::resolve(&isolated_demand(500.0), &net).unwrap();
    let mut cfg = SimConfig::uniform(ControllerKind::Fixed, 1);
    cfg.sim.reporting_interval = 0.5;
    cfg.sim.record_probes = true;
    cfg.estimator = cfg.estimator.with_reporting_interval(0.5);
    let p = cfg.estimator;
    let mut sim = Simulation::new(&net, &demand, cfg, 1).unwrap();
    let mut h = ProbeHistory::new(p.horizon);
    let mut seen = 0;
    let (mut sq, mut n) = (0.0, 0usize);
    while sim.time() < 1800.0 {
        sim.step().unwrap();
        let t = sim.time();
        let fresh = sim.probes()[seen..].to_vec();
        seen += fresh.len();
        h.ingest(t, &fresh).unwrap();
        if t < 600.0 || t % 10.0 != 0.0 {
            continue;
        }
        let field = estimate_links(&net, net.links().iter().map(|l| l.id), &h, t, &p);
        for lane in net.lanes() {
            let est = field.lane(lane.id).unwrap();
            let vehicles = sim.lane_vehicles(lane.id);
            for (cell, e) in lane.cells.iter().zip(est) {
                let half = cell.length / 2.0;
                let speeds: Vec<f64> = vehicles
                    .iter()
                    .filter(|v| v.x >= cell.center - half && v.x < cell.center + half)
                    .map(|v| v.speed)
                    .collect();
                if !speeds.is_empty() {
                    let truth = speeds.iter().sum::<f64>() / speeds.len() as f64;
                    sq += ((e.speed - truth) / p.free_flow_speed).powi(2);
                    n += 1;
                }
            }
        }
    }
    let rms = (sq / n as f64).sqrt();
    assert!(n > 1000);
    assert!(rms < 0.10, "RMS speed error {rms:.3} of v_f");
}

#[test]
fn probe_log_round_trip() {
    let net = isolated_network();
    let lane = net.lane_by_name("n_in/0").unwrap();
    let rs = vec![
        ProbeReading {
            vehicle: 3,
            lane,
            x: 12.25,
            t: 10.0,
            speed: 16.5,
        },
        ProbeReading {
            vehicle: 4,
            lane,
            x: 500.0,
            t: 10.0,
            speed: 0.0,
        },
        ProbeReading {
            vehicle: 3,
            lane,
            x: 177.0,
            t: 20.0,
            speed: 16.6,
        },
    ];
    let mut buf = format!("{PROBE_LOG_HEADER}\n").into_bytes();
    for r in &rs {
        write_reading(&mut buf, &net, r).unwrap();
    }
    let back = read_log(buf.as_slice(), &net).unwrap();
    assert_eq!(back, rs);
    let grouped = batches(&back);
    assert_eq!(grouped.len(), 2);
    assert_eq!((grouped[0].0, grouped[0].1.len()), (10.0, 2));

    let err = read_log("1,nope,0,0,0\n".as_bytes(), &net).unwrap_err();
    assert!(err.to_string().contains("line 1"));
}

fn readings_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0..500.0f64, 0.0..40.0f64, 0.0..(60.0 / 3.6f64)), 1..25)
}

proptest! {
    #[test]
    fn estimate_is_a_convex_combination(rs in readings_strategy(), x in 0.0..500.0f64) {
        let p = EstimatorParams::default();
        let readings: Vec<_> = rs.iter().enumerate().map(|(k, &(x, t, v))| reading(k as u64, x, t, v)).collect();
        let v = estimate_speed(x, 40.0, &readings, &p);
        let z: f64 = readings.iter().map(|r| kernel_weight(x - r.x, 40.0 - r.t, &p)).sum();
        if z >= p.z_floor {
            let lo = rs.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
            let hi = rs.iter().map(|r| r.2).fold(0.0, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        } else {
            prop_assert_eq!(v, p.free_flow_speed);
        }
    }

    #[test]
    fn farther_reading_never_gains_weight(
        rs in readings_strategy(),
        x in 0.0..500.0f64,
        dx in 0.0..200.0f64,
        dt in 0.0..20.0f64,
    ) {
        let p = EstimatorParams::default();
        let w0 = |ax: f64, at: f64| {
            let own = kernel_weight(x - ax, 40.0 - at, &p);
            let rest: f64 = rs[1..].iter().map(|r| kernel_weight(x - r.0, 40.0 - r.1, &p)).sum();
            own / (own + rest)
        };
        let (rx, rt, _) = rs[0];
        let away = if rx >= x { rx + dx } else { rx - dx };
        prop_assert!(w0(away, rt - dt) <= w0(rx, rt) + 1e-15);
    }

    #[test]
    fn densities_stay_in_range_and_fall_with_speed(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let p = EstimatorParams::default();
        let (va, vb) = (a.min(b) * p.free_flow_speed, a.max(b) * p.free_flow_speed);
        let (ra, rb) = (speed_to_density(va, &p).unwrap(), speed_to_density(vb, &p).unwrap());
        prop_assert!((0.0..=p.jam_density).contains(&ra) && (0.0..=p.jam_density).contains(&rb));
        prop_assert!(ra >= rb);
    }

    #[test]
    fn inversion_holds_over_speed_domain(f in 0.0..0.99f64) {
        let p = EstimatorParams::default();
        let v = f * p.free_flow_speed;
        let back = density_to_speed(speed_to_density(v, &p).unwrap(), &p).unwrap();
        prop_assert!((back - v).abs() <= 1e-9 * v.max(1e-9));
    }
}
