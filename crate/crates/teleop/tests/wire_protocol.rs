use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use pzcrawl_core::{RobotConfig, Scenario};
use pzcrawl_teleop::{AppState, ServerMessage, SessionCore, StateFrame};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn loaded() -> Scenario {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/paper_loaded.cfg");
    Scenario::load(path).expect("shipped config loads")
}

async fn start(state: AppState) -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(pzcrawl_teleop::serve(listener, state));
    addr
}

async fn bare_server() -> SocketAddr {
    start(AppState::single("bare", Scenario::new(RobotConfig::bare()))).await
}

async fn open(addr: SocketAddr, query: &str) -> Ws {
    let (ws, _) = connect_async(format!("ws://{addr}/session?{query}")).await.unwrap();
    ws
}

async fn next(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next())
            .await
            .expect("server went quiet")
            .expect("stream ended")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn next_frame(ws: &mut Ws) -> StateFrame {
    loop {
        if let ServerMessage::State(f) = next(ws).await {
            return f;
        }
    }
}

async fn command(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

async fn http_get(addr: SocketAddr, path: &str) -> Value {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
    s.write_all(req.as_bytes()).await.unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    let body = buf.split("\r\n\r\n").nth(1).unwrap();
    serde_json::from_str(body).unwrap()
}

#[tokio::test]
async fn session_opens_with_flat_robot_on_all_feet() {
    let addr = start(AppState::single("paper_loaded", loaded())).await;
    let mut ws = open(addr, "rate=30").await;
    let ServerMessage::Session { id, node_masses, .. } = next(&mut ws).await else {
        panic!("first message must announce the session");
    };
    assert!(id >= 1);
    assert_eq!(node_masses.len(), 31);
    let f = next_frame(&mut ws).await;
    assert_eq!(f.t, 0.0);
    assert_eq!(f.contacts, vec![true; 5]);
    assert!(f.nodes.iter().all(|p| p[1] == f.nodes[0][1]));
}

#[tokio::test]
async fn frame_rate_monotonic_time_and_com_consistency() {
    let addr = bare_server().await;
    let mut ws = open(addr, "rate=30&speed_scale=2").await;
    let ServerMessage::Session { node_masses, .. } = next(&mut ws).await else { panic!() };
    command(&mut ws, json!({"cmd": "set_drive", "freq_hz": 11.0, "on": true})).await;
    let mut frames = Vec::new();
    loop {
        let f = next_frame(&mut ws).await;
        let done = f.t >= 2.0 - 1e-9;
        frames.push(f);
        if done {
            break;
        }
    }
    let in_window = frames.iter().filter(|f| f.t > 0.0 && f.t <= 2.0 + 1e-9).count();
    assert!((58..=62).contains(&in_window), "{in_window} frames in 2 s");
    assert!(frames.windows(2).all(|w| w[1].t > w[0].t));
    let m: f64 = node_masses.iter().sum();
    for f in &frames {
        let cx: f64 = f.nodes.iter().zip(&node_masses).map(|(p, mi)| p[0] * mi).sum::<f64>() / m;
        let cz: f64 = f.nodes.iter().zip(&node_masses).map(|(p, mi)| p[1] * mi).sum::<f64>() / m;
        assert!((cx - f.com[0]).abs() < 1e-9 && (cz - f.com[1]).abs() < 1e-9);
    }
}

#[tokio::test]
async fn acks_carry_application_time_and_commands_are_causal() {
    let addr = bare_server().await;
    let mut ws = open(addr, "rate=60&speed_scale=2").await;
    next(&mut ws).await;
    for _ in 0..10 {
        next_frame(&mut ws).await;
    }
    command(&mut ws, json!({"cmd": "set_drive", "freq_hz": 11.0, "on": true, "cmd_id": 42})).await;
    let mut seen = Vec::new();
    let applied_at = loop {
        match next(&mut ws).await {
            ServerMessage::State(f) => seen.push(f),
            ServerMessage::Ack { cmd_id, applied_at } => {
                assert_eq!(cmd_id, 42);
                break applied_at;
            }
            other => panic!("unexpected {other:?}"),
        }
    };
    for _ in 0..20 {
        seen.push(next_frame(&mut ws).await);
    }
    for f in &seen {
        if f.t < applied_at {
            assert!(!f.drive.on, "frame at {} precedes the command at {applied_at}", f.t);
        } else if f.t > applied_at {
            assert!(f.drive.on);
        }
    }
    assert!(seen.iter().any(|f| f.drive.on));
}

#[tokio::test]
async fn out_of_range_commands_report_the_bound() {
    let addr = bare_server().await;
    let mut ws = open(addr, "").await;
    next(&mut ws).await;
    command(&mut ws, json!({"cmd": "set_drive", "freq_hz": 250.0, "on": true})).await;
    loop {
        match next(&mut ws).await {
            ServerMessage::Error { code, msg, cmd_id } => {
                assert_eq!(serde_json::to_value(code).unwrap(), "out_of_range");
                assert!(msg.contains("100"), "{msg}");
                assert!(cmd_id.is_some());
                break;
            }
            ServerMessage::Ack { .. } => panic!("accepted an out-of-range frequency"),
            _ => {}
        }
    }
    command(&mut ws, json!({"cmd": "add_payload", "x_m": 0.4, "mass_kg": -0.01})).await;
    loop {
        if let ServerMessage::Error { msg, .. } = next(&mut ws).await {
            assert!(msg.contains("mass_kg"), "{msg}");
            break;
        }
    }
    command(&mut ws, json!({"cmd": "warp"})).await;
    loop {
        if let ServerMessage::Error { code, .. } = next(&mut ws).await {
            assert_eq!(serde_json::to_value(code).unwrap(), "bad_request");
            break;
        }
    }
}

#[tokio::test]
async fn bad_session_parameters_are_rejected_before_start() {
    let addr = bare_server().await;
    let mut ws = open(addr, "config=nonexistent").await;
    let ServerMessage::Error { code, .. } = next(&mut ws).await else { panic!("expected an error") };
    assert_eq!(serde_json::to_value(code).unwrap(), "config");
    let mut ws = open(addr, "rate=500").await;
    let ServerMessage::Error { msg, .. } = next(&mut ws).await else { panic!("expected an error") };
    assert!(msg.contains("120"), "{msg}");
}

#[tokio::test]
async fn concurrent_sessions_are_isolated() {
    let addr = bare_server().await;
    let mut a = open(addr, "rate=30").await;
    let mut b = open(addr, "rate=30").await;
    let ServerMessage::Session { id: ia, .. } = next(&mut a).await else { panic!() };
    let ServerMessage::Session { id: ib, .. } = next(&mut b).await else { panic!() };
    assert_ne!(ia, ib);
    command(&mut a, json!({"cmd": "set_drive", "freq_hz": 11.0, "on": true})).await;
    command(&mut a, json!({"cmd": "add_payload", "x_m": 0.4, "mass_kg": 0.013})).await;
    // B must match an undisturbed replay of the same scenario bit for bit.
    let mut replay = SessionCore::new(Scenario::new(RobotConfig::bare()), 30.0, 1).unwrap();
    let mut expected = vec![replay.frame()];
    let mut f = next_frame(&mut b).await;
    assert_eq!(f, expected[0]);
    for _ in 0..30 {
        f = next_frame(&mut b).await;
        while expected.last().unwrap().t < f.t {
            if let Some(e) = replay.step().unwrap() {
                expected.push(e);
            }
        }
        assert_eq!(&f, expected.last().unwrap());
    }
    let cfg_a = http_get(addr, &format!("/config?session={ia}")).await;
    let cfg_b = http_get(addr, &format!("/config?session={ib}")).await;
    let payloads = |v: &Value| Scenario::parse(v["config"].as_str().unwrap()).unwrap().robot.mass_profile.point_masses.len();
    assert_eq!(payloads(&cfg_a), 1);
    assert_eq!(payloads(&cfg_b), 0);
}

#[tokio::test]
async fn health_and_config_endpoints() {
    let addr = bare_server().await;
    let cfg = http_get(addr, "/config").await;
    assert_eq!(cfg["name"], "bare");
    assert!(Scenario::parse(cfg["config"].as_str().unwrap()).is_ok());
    let mut ws = open(addr, "").await;
    next(&mut ws).await;
    next_frame(&mut ws).await;
    let health = http_get(addr, "/health").await;
    assert!(health["status"] == "ok" || health["status"] == "degraded");
    assert_eq!(health["sessions"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn live_drive_moves_forward_then_stops() {
    let addr = start(AppState::single("paper_loaded", loaded())).await;
    let mut ws = open(addr, "rate=20&speed_scale=2").await;
    next(&mut ws).await;
    command(&mut ws, json!({"cmd": "set_drive", "freq_hz": 11.0, "on": true})).await;
    let mut last = next_frame(&mut ws).await;
    while last.t < 5.0 {
        last = next_frame(&mut ws).await;
    }
    assert!(last.speed_cm_s > 0.0, "speed estimate {} cm/s at t = {}", last.speed_cm_s, last.t);
    let driving = last.speed_cm_s;
    command(&mut ws, json!({"cmd": "set_drive", "freq_hz": 11.0, "on": false})).await;
    let t_off = last.t;
    while last.t < t_off + 3.0 {
        last = next_frame(&mut ws).await;
    }
    assert!(!last.drive.on);
    assert!(last.speed_cm_s.abs() < 0.2 * driving.abs(), "{} after stopping", last.speed_cm_s);
}

#[tokio::test]
async fn sim_time_keeps_pace_with_the_wall_clock() {
    let addr = bare_server().await;
    let mut ws = open(addr, "rate=20").await;
    next(&mut ws).await;
    command(&mut ws, json!({"cmd": "set_drive", "freq_hz": 11.0, "on": true})).await;
    let first = next_frame(&mut ws).await;
    let start = std::time::Instant::now();
    let mut last = first.clone();
    while start.elapsed() < Duration::from_secs(5) {
        last = next_frame(&mut ws).await;
    }
    let wall = start.elapsed().as_secs_f64();
    let ratio = (last.t - first.t) / wall;
    let health = http_get(addr, "/health").await;
    let degraded = health["status"] == "degraded";
    // One frame interval of slack for where the window edges fall.
    assert!(degraded || (ratio - 1.0).abs() < 0.02 + 0.05 / wall, "sim/wall {ratio:.4}, health {health}");
}
