//! Scenario construction: configuration, node placement and the static
//! contact graph.
//!
//! A scenario consists of one artist node (always index 0) and a block of
//! audience nodes laid out on a near-square lattice. Nodes never move, so
//! the contact graph is built once and stays fixed for the whole run.

use serde::Serialize;

use crate::settings::keys;

/// The artist node. Scenarios have exactly one, always at index 0.
pub const ARTIST: NodeId = NodeId(0);

/// Dense node identifier: 0 is the artist, 1..=audience_count the audience.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn kind(self) -> NodeKind {
        if self.0 == 0 {
            NodeKind::Artist
        } else {
            NodeKind::Audience
        }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Artist,
    Audience,
}

/// A position in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Routing protocol selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RouterKind {
    Prophet,
    ProphetV2,
    SprayWait,
    SprayFocus,
}

impl RouterKind {
    pub const ALL: [RouterKind; 4] = [
        RouterKind::Prophet,
        RouterKind::ProphetV2,
        RouterKind::SprayWait,
        RouterKind::SprayFocus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RouterKind::Prophet => "PROPHET",
            RouterKind::ProphetV2 => "PROPHETV2",
            RouterKind::SprayWait => "SPRAY_WAIT",
            RouterKind::SprayFocus => "SPRAY_FOCUS",
        }
    }

    pub fn parse(s: &str) -> Option<RouterKind> {
        match s {
            "PROPHET" => Some(RouterKind::Prophet),
            "PROPHETV2" => Some(RouterKind::ProphetV2),
            "SPRAY_WAIT" => Some(RouterKind::SprayWait),
            "SPRAY_FOCUS" => Some(RouterKind::SprayFocus),
            _ => None,
        }
    }
}

impl std::fmt::Display for RouterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Protocol parameters shared by all routers of a run.
///
/// Each router family reads the subset it cares about; the rest is ignored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouterParams {
    /// Fixed direct-contact boost used by classic PRoPHET.
    pub p_init: f64,
    /// Ceiling of the interval-scaled contact boost.
    pub p_enc_max: f64,
    /// Typical time between connections, in seconds.
    pub i_typ: f64,
    /// Transitivity weight.
    pub beta: f64,
    /// Decay multiplier applied once per elapsed aging interval.
    pub gamma: f64,
    /// Aging quantum in seconds; also the re-encounter epoch of the engine.
    pub aging_interval: f64,
    /// Initial copy budget for the spray family.
    pub copies_l: u32,
    /// Minimum utility improvement (seconds) required for a focus hand-off.
    pub focus_threshold: f64,
    /// Offset subtracted when inheriting a peer's last-encounter times.
    pub focus_timer_offset: f64,
}

impl Default for RouterParams {
    fn default() -> Self {
        RouterParams {
            p_init: 0.75,
            p_enc_max: 0.5,
            i_typ: 1800.0,
            beta: 0.9,
            gamma: 0.9998,
            aging_interval: 50.0,
            copies_l: 50,
            focus_threshold: 0.0,
            focus_timer_offset: 0.0,
        }
    }
}

/// Full description of a single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub audience_count: u32,
    /// Explicit artist position; `None` picks the stage-front default.
    pub artist_position: Option<Point>,
    pub grid_origin: Point,
    /// Lattice spacing in metres.
    pub grid_spacing: f64,
    /// Radio range in metres (boundary inclusive).
    pub radio_range: f64,
    /// Link bandwidth in bytes per second.
    pub link_bandwidth: f64,
    /// Message payload size in bytes.
    pub message_size: u64,
    /// Per-node buffer capacity in bytes.
    pub buffer_capacity: u64,
    /// Message time-to-live in seconds.
    pub message_ttl: f64,
    /// Simulated duration in seconds.
    pub sim_duration: f64,
    /// Engine tick length in seconds.
    pub step_size: f64,
    /// Seconds between message creations at the artist.
    pub generation_interval: f64,
    pub rng_seed: u64,
    pub router_kind: RouterKind,
    pub router_params: RouterParams,
}

impl ScenarioConfig {
    /// The default configuration: 100 audience members on a 10 m grid,
    /// 1 kB messages, 1 MB buffers, 10-minute TTL, two-hour run over
    /// 250 kB/s Bluetooth-class links.
    pub fn baseline() -> Self {
        ScenarioConfig {
            audience_count: 100,
            artist_position: None,
            grid_origin: Point::new(0.0, 0.0),
            grid_spacing: 10.0,
            radio_range: 10.0,
            link_bandwidth: 250_000.0,
            message_size: 1_000,
            buffer_capacity: 1_000_000,
            message_ttl: 600.0,
            sim_duration: 7_200.0,
            step_size: 1.0,
            generation_interval: 25.0,
            rng_seed: 1,
            router_kind: RouterKind::ProphetV2,
            router_params: RouterParams::default(),
        }
    }

    /// Total node count including the artist.
    pub fn node_count(&self) -> u32 {
        self.audience_count + 1
    }

    /// The artist position actually used: the configured one, or the
    /// stage-front default.
    pub fn resolved_artist_position(&self) -> Point {
        self.artist_position.unwrap_or_else(|| {
            default_artist_position(self.audience_count, self.grid_spacing, self.grid_origin)
        })
    }

    /// Checks every config invariant, returning the offending settings key.
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        fn positive(key: &'static str, v: f64) -> Result<(), InvalidConfig> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(InvalidConfig::new(key, "must be a positive finite number"))
            }
        }
        fn probability(key: &'static str, v: f64) -> Result<(), InvalidConfig> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(InvalidConfig::new(key, "must lie in [0, 1]"))
            }
        }

        if self.audience_count < 1 {
            return Err(InvalidConfig::new(keys::AUDIENCE_COUNT, "must be at least 1"));
        }
        positive(keys::GRID_SPACING, self.grid_spacing)?;
        positive(keys::RADIO_RANGE, self.radio_range)?;
        positive(keys::LINK_BANDWIDTH, self.link_bandwidth)?;
        if self.message_size == 0 {
            return Err(InvalidConfig::new(keys::MESSAGE_SIZE, "must be positive"));
        }
        if self.buffer_capacity == 0 {
            return Err(InvalidConfig::new(keys::BUFFER_CAPACITY, "must be positive"));
        }
        positive(keys::MESSAGE_TTL, self.message_ttl)?;
        positive(keys::SIM_DURATION, self.sim_duration)?;
        positive(keys::STEP_SIZE, self.step_size)?;
        positive(keys::GENERATION_INTERVAL, self.generation_interval)?;
        if self.message_size > self.buffer_capacity {
            return Err(InvalidConfig::new(
                keys::MESSAGE_SIZE,
                "must not exceed scenario.buffer_capacity; no message could ever be stored",
            ));
        }
        if self.step_size > self.message_ttl {
            return Err(InvalidConfig::new(
                keys::STEP_SIZE,
                "must not exceed scenario.message_ttl",
            ));
        }

        let p = &self.router_params;
        probability(keys::P_INIT, p.p_init)?;
        probability(keys::P_ENC_MAX, p.p_enc_max)?;
        positive(keys::I_TYP, p.i_typ)?;
        probability(keys::BETA, p.beta)?;
        if !(p.gamma > 0.0 && p.gamma <= 1.0) {
            return Err(InvalidConfig::new(keys::GAMMA, "must lie in (0, 1]"));
        }
        positive(keys::AGING_INTERVAL, p.aging_interval)?;
        if p.copies_l < 1 {
            return Err(InvalidConfig::new(keys::COPIES_L, "must be at least 1"));
        }
        if !(p.focus_threshold >= 0.0 && p.focus_threshold.is_finite()) {
            return Err(InvalidConfig::new(keys::FOCUS_THRESHOLD, "must be >= 0"));
        }
        if !(p.focus_timer_offset >= 0.0 && p.focus_timer_offset.is_finite()) {
            return Err(InvalidConfig::new(keys::FOCUS_TIMER_OFFSET, "must be >= 0"));
        }
        Ok(())
    }
}

/// A config field violating one of its invariants.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{key}: {reason}")]
pub struct InvalidConfig {
    pub key: &'static str,
    pub reason: &'static str,
}

impl InvalidConfig {
    fn new(key: &'static str, reason: &'static str) -> Self {
        InvalidConfig { key, reason }
    }
}

/// Static adjacency of all nodes within radio range of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactGraph {
    positions: Vec<Point>,
    adjacency: Vec<Vec<NodeId>>,
}

impl ContactGraph {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, node: NodeId) -> Point {
        self.positions[node.index()]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Neighbours of `node`, sorted by ascending index.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.index()]
    }

    pub fn are_connected(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].binary_search(&b).is_ok()
    }
}

/// Positions the audience on a near-square lattice, filled row-major from
/// `origin`. The row count is `round(sqrt(n))`; the last row may be partial.
pub fn grid_positions(audience_count: u32, spacing: f64, origin: Point) -> Vec<Point> {
    assert!(audience_count >= 1, "audience_count must be >= 1");
    assert!(spacing > 0.0, "spacing must be positive");
    let n = audience_count as u64;
    let rows = ((n as f64).sqrt().round() as u64).max(1);
    let cols = n.div_ceil(rows);
    (0..n)
        .map(|i| {
            let row = i / cols;
            let col = i % cols;
            Point::new(
                origin.x + col as f64 * spacing,
                origin.y + row as f64 * spacing,
            )
        })
        .collect()
}

fn grid_cols(audience_count: u32) -> u64 {
    let n = audience_count as u64;
    let rows = ((n as f64).sqrt().round() as u64).max(1);
    n.div_ceil(rows)
}

/// Stage-front default for the artist: one spacing unit in front of the
/// first grid row, aligned with the middle column so the artist sits exactly
/// at range of its nearest audience member.
pub fn default_artist_position(audience_count: u32, spacing: f64, origin: Point) -> Point {
    let cols = grid_cols(audience_count);
    let mid_col = (cols - 1) / 2;
    Point::new(origin.x + mid_col as f64 * spacing, origin.y - spacing)
}

/// Builds the contact graph: an edge exists iff the Euclidean distance is
/// within `radio_range`, boundary inclusive.
pub fn build_contact_graph(positions: &[Point], radio_range: f64) -> ContactGraph {
    assert!(!positions.is_empty(), "positions must be non-empty");
    assert!(radio_range > 0.0, "radio_range must be positive");
    let range_sq = radio_range * radio_range;
    let n = positions.len();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = positions[i].x - positions[j].x;
            let dy = positions[i].y - positions[j].y;
            if dx * dx + dy * dy <= range_sq {
                adjacency[i].push(NodeId(j as u32));
                adjacency[j].push(NodeId(i as u32));
            }
        }
    }
    ContactGraph {
        positions: positions.to_vec(),
        adjacency,
    }
}

/// A placed scenario: the artist at index 0 followed by the audience grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: ContactGraph,
    pub nodes: Vec<NodeId>,
}

impl Scenario {
    /// True when no audience member is within radio range of the artist.
    /// Legal, but no message can ever leave the source.
    pub fn artist_isolated(&self) -> bool {
        self.graph.neighbors(ARTIST).is_empty()
    }
}

/// Places the artist and audience and builds the contact graph over all
/// `audience_count + 1` nodes.
pub fn place_scenario(config: &ScenarioConfig) -> Scenario {
    let mut positions = Vec::with_capacity(config.node_count() as usize);
    positions.push(config.resolved_artist_position());
    positions.extend(grid_positions(
        config.audience_count,
        config.grid_spacing,
        config.grid_origin,
    ));
    let graph = build_contact_graph(&positions, config.radio_range);
    let nodes = (0..config.node_count()).map(NodeId).collect();
    Scenario { graph, nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_grid_sits_at_origin() {
        let pts = grid_positions(1, 10.0, Point::new(0.0, 0.0));
        assert_eq!(pts, vec![Point::new(0.0, 0.0)]);
    }

    #[test]
    fn hundred_nodes_form_a_ten_by_ten_lattice() {
        let pts = grid_positions(100, 10.0, Point::new(0.0, 0.0));
        assert_eq!(pts.len(), 100);
        assert_eq!(pts[0], Point::new(0.0, 0.0));
        assert_eq!(pts[9], Point::new(90.0, 0.0));
        assert_eq!(pts[90], Point::new(0.0, 90.0));
        assert_eq!(pts[99], Point::new(90.0, 90.0));
    }

    #[test]
    fn five_nodes_fill_two_rows_of_three() {
        let pts = grid_positions(5, 10.0, Point::new(0.0, 0.0));
        let expected = vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(20.0, 0.0),
            Point::new(0.0, 10.0),
            Point::new(10.0, 10.0),
        ];
        assert_eq!(pts, expected);
    }

    #[test]
    fn row_neighbours_are_exactly_one_spacing_apart() {
        for n in [2u32, 5, 17, 100, 250] {
            let pts = grid_positions(n, 7.5, Point::new(3.0, -4.0));
            assert_eq!(pts.len(), n as usize);
            let cols = grid_cols(n) as usize;
            for i in 0..pts.len() - 1 {
                if (i + 1) % cols != 0 {
                    let d = pts[i].distance(pts[i + 1]);
                    assert!((d - 7.5).abs() < 1e-12, "n={n} i={i} d={d}");
                }
            }
        }
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let positions = [Point::new(0.0, 0.0), Point::new(10.0, 0.0)];
        let graph = build_contact_graph(&positions, 10.0);
        assert!(graph.are_connected(NodeId(0), NodeId(1)));
    }

    #[test]
    fn square_grid_has_orthogonal_edges_only() {
        let positions = grid_positions(4, 10.0, Point::new(0.0, 0.0));
        let graph = build_contact_graph(&positions, 10.0);
        // diagonal distance is sqrt(200) > 10
        let mut edges = 0;
        for i in 0..4u32 {
            edges += graph.neighbors(NodeId(i)).len();
            assert!(!graph.neighbors(NodeId(i)).contains(&NodeId(i)));
        }
        assert_eq!(edges, 8, "4 undirected orthogonal edges");
        assert!(!graph.are_connected(NodeId(0), NodeId(3)));
        assert!(!graph.are_connected(NodeId(1), NodeId(2)));
    }

    #[test]
    fn single_node_has_empty_adjacency() {
        let graph = build_contact_graph(&[Point::new(1.0, 2.0)], 10.0);
        assert!(graph.neighbors(NodeId(0)).is_empty());
    }

    #[test]
    fn duplicate_positions_are_connected() {
        let p = Point::new(5.0, 5.0);
        let graph = build_contact_graph(&[p, p], 1.0);
        assert!(graph.are_connected(NodeId(0), NodeId(1)));
    }

    #[test]
    fn placing_hundred_audience_yields_101_nodes() {
        let config = ScenarioConfig::baseline();
        let scenario = place_scenario(&config);
        assert_eq!(scenario.graph.node_count(), 101);
        assert_eq!(scenario.nodes.len(), 101);
        assert_eq!(scenario.nodes[0], ARTIST);
        assert_eq!(scenario.nodes[0].kind(), NodeKind::Artist);
        assert_eq!(scenario.nodes[100].kind(), NodeKind::Audience);
    }

    #[test]
    fn artist_adjacency_matches_front_row_distance_filter() {
        // With the artist centred between columns at (45, -10) every front-row
        // node is sqrt(125) > 10 m away, so the filter yields no neighbours and
        // the scenario is flagged.
        let mut config = ScenarioConfig::baseline();
        config.artist_position = Some(Point::new(45.0, -10.0));
        let scenario = place_scenario(&config);
        let artist_pos = config.resolved_artist_position();
        let expected: Vec<NodeId> = grid_positions(100, 10.0, Point::new(0.0, 0.0))
            .iter()
            .enumerate()
            .filter(|(_, p)| artist_pos.distance(**p) <= config.radio_range)
            .map(|(i, _)| NodeId(i as u32 + 1))
            .collect();
        assert_eq!(scenario.graph.neighbors(ARTIST), expected.as_slice());
        assert!(scenario.artist_isolated());
    }

    #[test]
    fn default_artist_position_touches_the_grid() {
        for n in [1u32, 9, 100, 250, 500, 1000] {
            let mut config = ScenarioConfig::baseline();
            config.audience_count = n;
            let scenario = place_scenario(&config);
            assert!(
                !scenario.artist_isolated(),
                "default artist must reach the grid for n={n}"
            );
        }
    }

    #[test]
    fn single_audience_member_five_metres_away_forms_one_edge() {
        let mut config = ScenarioConfig::baseline();
        config.audience_count = 1;
        config.artist_position = Some(Point::new(0.0, -5.0));
        let scenario = place_scenario(&config);
        assert_eq!(scenario.graph.neighbors(ARTIST), &[NodeId(1)]);
        assert_eq!(scenario.graph.neighbors(NodeId(1)), &[ARTIST]);
    }

    #[test]
    fn placement_is_a_pure_function_of_config() {
        let config = ScenarioConfig::baseline();
        assert_eq!(place_scenario(&config), place_scenario(&config));
    }

    #[test]
    fn validate_rejects_zero_ttl() {
        let mut config = ScenarioConfig::baseline();
        config.message_ttl = 0.0;
        let err = config.validate().unwrap_err();
        assert_eq!(err.key, keys::MESSAGE_TTL);
    }

    #[test]
    fn validate_rejects_message_larger_than_buffer() {
        let mut config = ScenarioConfig::baseline();
        config.message_size = 2_000_000;
        let err = config.validate().unwrap_err();
        assert_eq!(err.key, keys::MESSAGE_SIZE);
    }

    #[test]
    fn validate_rejects_step_longer_than_ttl() {
        let mut config = ScenarioConfig::baseline();
        config.step_size = 601.0;
        assert!(config.validate().is_err());
    }
}
