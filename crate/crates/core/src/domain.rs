//! Shared vocabulary for the coordination network: calendar days, products,
//! demand lines, bills of material, capacity calendars and the network layout.
//!
//! A network is a stack of tiers mirroring the product breakdown structure.
//! Tier 1 faces the external clients, the last managed tier faces external
//! raw material suppliers. Every node (a "virtual enterprise node", VEN)
//! only ever talks to partners on the two adjacent tiers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::money::Money;

/// Whole units of product. Fractional quantities do not exist in this model.
pub type Units = u32;

/// A calendar day, counted as a day-of-year style index from an arbitrary
/// epoch. Offsets are exact: `(d + k) - k == d` for any `k`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Day(pub u32);

impl Day {
    pub fn index(self) -> u32 {
        self.0
    }

    /// Moves the day earlier by `offset`, failing instead of wrapping when
    /// the result would fall before day zero.
    pub fn checked_back(self, offset: u32) -> Option<Day> {
        self.0.checked_sub(offset).map(Day)
    }
}

impl std::ops::Add<u32> for Day {
    type Output = Day;
    fn add(self, rhs: u32) -> Day {
        Day(self.0 + rhs)
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! string_id {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(
    /// Identifier of a product or component.
    ProductId
);
string_id!(
    /// Identifier of a network node, external client or external supplier.
    VenId
);

/// One-based tier index. Tier 0 is the external client side, the tier after
/// the last managed one is the external supplier side.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TierId(pub u32);

impl fmt::Display for TierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A dated quantity of one product: the atom of every order and delivery
/// promise. A zero quantity is a no-op and never appears in a message.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DemandLine {
    pub product: ProductId,
    pub due: Day,
    pub qty: Units,
}

impl DemandLine {
    pub fn new(product: impl Into<String>, due: Day, qty: Units) -> DemandLine {
        DemandLine { product: ProductId::new(product), due, qty }
    }
}

impl fmt::Display for DemandLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} x{} due {}", self.product, self.qty, self.due)
    }
}

/// An alternative delivery proposal: one product delivered in one or more
/// dated slices. Dates strictly increase and the total is positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub lines: Vec<DemandLine>,
}

impl Scenario {
    pub fn total_qty(&self) -> Units {
        self.lines.iter().map(|l| l.qty).sum()
    }

    /// Checks the structural rules for a scenario.
    pub fn well_formed(&self) -> bool {
        if self.lines.is_empty() || self.lines.iter().any(|l| l.qty == 0) {
            return false;
        }
        let one_product = self.lines.iter().all(|l| l.product == self.lines[0].product);
        let increasing = self.lines.windows(2).all(|w| w[0].due < w[1].due);
        one_product && increasing
    }
}

/// One parent-to-child edge of a bill of material. Building one unit of
/// `parent` consumes `qty_per` units of `child`, which must be on hand
/// `lead_offset` days before the parent is due.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BomEdge {
    pub parent: ProductId,
    pub child: ProductId,
    pub qty_per: Units,
    pub lead_offset: u32,
}

/// Finite production capacity per day over a bounded horizon. Days outside
/// the horizon have no capacity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityCalendar {
    start: Day,
    end: Day,
    per_day: Vec<Units>,
}

impl CapacityCalendar {
    /// Builds a calendar with a uniform base rate and optional per-range
    /// overrides. The horizon is inclusive on both ends.
    pub fn new(
        start: Day,
        end: Day,
        base: Units,
        overrides: &[(Day, Day, Units)],
    ) -> Result<CapacityCalendar, DomainError> {
        if end < start {
            return Err(DomainError::BadHorizon { start, end });
        }
        let len = (end.0 - start.0 + 1) as usize;
        let mut per_day = vec![base; len];
        for &(from, to, cap) in overrides {
            if from < start || to > end || to < from {
                return Err(DomainError::BadOverride { from, to });
            }
            for d in from.0..=to.0 {
                per_day[(d - start.0) as usize] = cap;
            }
        }
        Ok(CapacityCalendar { start, end, per_day })
    }

    pub fn start(&self) -> Day {
        self.start
    }

    pub fn end(&self) -> Day {
        self.end
    }

    pub fn capacity_on(&self, day: Day) -> Units {
        if day < self.start || day > self.end {
            0
        } else {
            self.per_day[(day.0 - self.start.0) as usize]
        }
    }

    pub fn days(&self) -> impl Iterator<Item = Day> + '_ {
        (self.start.0..=self.end.0).map(Day)
    }

    /// Total capacity on days up to and including `day`.
    pub fn total_through(&self, day: Day) -> Units {
        self.days().take_while(|d| *d <= day).map(|d| self.capacity_on(d)).sum()
    }
}

/// Per-unit money rates of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub unit_production: Money,
    pub overtime: Money,
    pub subcontract: Money,
    pub penalty_per_unit_day: Money,
    pub selling_price: Money,
}

/// Static description of one managed node.
#[derive(Debug, Clone, PartialEq)]
pub struct VenConfig {
    pub id: VenId,
    pub tier: TierId,
    pub products: Vec<ProductId>,
    pub bom: Vec<BomEdge>,
    pub stocks: BTreeMap<ProductId, Units>,
    pub capacity: CapacityCalendar,
    pub costs: CostModel,
    /// Most overtime units the node will ever agree to. The planner only
    /// uses overtime when it is offered some of this pool.
    pub overtime_limit: Units,
    /// Same, for subcontracted units.
    pub subcontract_limit: Units,
    /// Partners one tier up, in preference order.
    pub customers: Vec<VenId>,
    /// Partners one tier down, in preference order. The first supplier able
    /// to make a component is the preferred one for it.
    pub suppliers: Vec<VenId>,
}

impl VenConfig {
    pub fn makes(&self, product: &ProductId) -> bool {
        self.products.contains(product)
    }
}

/// Scripted external client. It injects orders and reacts to replies with a
/// fixed policy instead of running agents of its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientStub {
    pub id: VenId,
    /// Whether the client accepts the first scenario of a counter-proposal.
    pub accepts_counter_proposals: bool,
}

/// Scripted external raw material supplier. It accepts any order at the
/// requested terms. `flex_days` bounds how many days earlier than an already
/// assumed date the escalation layer may ask it to deliver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupplierStub {
    pub id: VenId,
    pub products: Vec<ProductId>,
    pub flex_days: u32,
}

/// The whole layered network: managed tiers plus the scripted edges.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// `tiers[0]` is tier 1. Order inside a tier is the declaration order and
    /// is preserved everywhere for determinism.
    pub tiers: Vec<Vec<VenConfig>>,
    pub clients: Vec<ClientStub>,
    pub external_suppliers: Vec<SupplierStub>,
}

impl NetworkConfig {
    pub fn tier_count(&self) -> u32 {
        self.tiers.len() as u32
    }

    pub fn vens(&self) -> impl Iterator<Item = &VenConfig> {
        self.tiers.iter().flatten()
    }

    pub fn ven(&self, id: &VenId) -> Option<&VenConfig> {
        self.vens().find(|v| &v.id == id)
    }

    pub fn ven_mut(&mut self, id: &VenId) -> Option<&mut VenConfig> {
        self.tiers.iter_mut().flatten().find(|v| &v.id == id)
    }

    pub fn client(&self, id: &VenId) -> Option<&ClientStub> {
        self.clients.iter().find(|c| &c.id == id)
    }

    pub fn external_supplier(&self, id: &VenId) -> Option<&SupplierStub> {
        self.external_suppliers.iter().find(|s| &s.id == id)
    }

    pub fn is_client(&self, id: &VenId) -> bool {
        self.client(id).is_some()
    }

    pub fn is_external_supplier(&self, id: &VenId) -> bool {
        self.external_supplier(id).is_some()
    }

    /// Tier of any referenced party: 0 for clients, `tier_count + 1` for
    /// external suppliers, the declared tier for managed nodes.
    pub fn tier_of(&self, id: &VenId) -> Option<TierId> {
        if self.is_client(id) {
            return Some(TierId(0));
        }
        if self.is_external_supplier(id) {
            return Some(TierId(self.tier_count() + 1));
        }
        self.ven(id).map(|v| v.tier)
    }
}

/// A structural problem found in a network description. Validation reports
/// all of them instead of stopping at the first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    /// The same id is declared more than once.
    DuplicateId { id: VenId },
    /// A link names a party that exists nowhere in the network.
    DanglingReference { ven: VenId, referenced: VenId },
    /// A link crosses more than one tier boundary.
    NonAdjacentLink { ven: VenId, referenced: VenId, expected: TierId, actual: TierId },
    /// A node supplies or buys from itself, directly closing a cycle.
    Cycle { ven: VenId },
    /// A bill of material reaches itself through its own edges.
    BomCycle { ven: VenId, product: ProductId },
    /// A bill of material edge with a zero use factor.
    ZeroQtyPer { ven: VenId, parent: ProductId, child: ProductId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id } => write!(f, "duplicate id {id}"),
            Violation::DanglingReference { ven, referenced } => {
                write!(f, "{ven} references unknown partner {referenced}")
            }
            Violation::NonAdjacentLink { ven, referenced, expected, actual } => write!(
                f,
                "{ven} links to {referenced} on tier {actual}, expected tier {expected}"
            ),
            Violation::Cycle { ven } => write!(f, "cycle: {ven} trades with itself"),
            Violation::BomCycle { ven, product } => {
                write!(f, "bill of material cycle at {ven} starting from {product}")
            }
            Violation::ZeroQtyPer { ven, parent, child } => {
                write!(f, "{ven} declares a zero use factor on edge {parent} -> {child}")
            }
        }
    }
}

/// Errors raised by domain lookups and constructors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DomainError {
    #[error("horizon end {end} precedes start {start}")]
    BadHorizon { start: Day, end: Day },
    #[error("capacity override {from}..{to} falls outside the horizon")]
    BadOverride { from: Day, to: Day },
    #[error("{ven} does not make {product}, the order is misrouted")]
    NotAProducer { ven: VenId, product: ProductId },
}

/// Checks the structural invariants of a network and returns every violation
/// found, in a canonical order. An empty result means the network is sound:
/// partner links then form a directed acyclic graph layered exactly by tier.
pub fn validate_network(net: &NetworkConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen: BTreeSet<&VenId> = BTreeSet::new();
    let all_ids = net
        .vens()
        .map(|v| &v.id)
        .chain(net.clients.iter().map(|c| &c.id))
        .chain(net.external_suppliers.iter().map(|s| &s.id));
    for id in all_ids {
        if !seen.insert(id) {
            out.push(Violation::DuplicateId { id: id.clone() });
        }
    }

    for ven in net.vens() {
        let mut check_link = |referenced: &VenId, expected: TierId| {
            if *referenced == ven.id {
                out.push(Violation::Cycle { ven: ven.id.clone() });
                return;
            }
            match net.tier_of(referenced) {
                None => out.push(Violation::DanglingReference {
                    ven: ven.id.clone(),
                    referenced: referenced.clone(),
                }),
                Some(actual) if actual != expected => out.push(Violation::NonAdjacentLink {
                    ven: ven.id.clone(),
                    referenced: referenced.clone(),
                    expected,
                    actual,
                }),
                Some(_) => {}
            }
        };
        for customer in &ven.customers {
            check_link(customer, TierId(ven.tier.0 - 1));
        }
        for supplier in &ven.suppliers {
            check_link(supplier, TierId(ven.tier.0 + 1));
        }

        for edge in &ven.bom {
            if edge.qty_per == 0 {
                out.push(Violation::ZeroQtyPer {
                    ven: ven.id.clone(),
                    parent: edge.parent.clone(),
                    child: edge.child.clone(),
                });
            }
        }
        for product in &ven.products {
            if bom_reaches_itself(&ven.bom, product) {
                out.push(Violation::BomCycle { ven: ven.id.clone(), product: product.clone() });
            }
        }
    }

    out.sort();
    out.dedup();
    out
}

fn bom_reaches_itself(bom: &[BomEdge], start: &ProductId) -> bool {
    let mut stack = vec![start.clone()];
    let mut visited = BTreeSet::new();
    while let Some(p) = stack.pop() {
        for edge in bom.iter().filter(|e| e.parent == p) {
            if edge.child == *start {
                return true;
            }
            if visited.insert(edge.child.clone()) {
                stack.push(edge.child.clone());
            }
        }
    }
    false
}

/// Direct components of `product` at `ven`, in bill of material declaration
/// order. Asking a node about a product it does not make is an error.
pub fn bom_children<'a>(
    ven: &'a VenConfig,
    product: &ProductId,
) -> Result<Vec<&'a BomEdge>, DomainError> {
    if !ven.makes(product) {
        return Err(DomainError::NotAProducer {
            ven: ven.id.clone(),
            product: product.clone(),
        });
    }
    Ok(ven.bom.iter().filter(|e| &e.parent == product).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn money(s: &str) -> Money {
        s.parse().unwrap()
    }

    fn costs() -> CostModel {
        CostModel {
            unit_production: money("2.00"),
            overtime: money("3.00"),
            subcontract: money("4.00"),
            penalty_per_unit_day: money("0.50"),
            selling_price: money("5.00"),
        }
    }

    fn ven(id: &str, tier: u32, products: &[&str], customers: &[&str], suppliers: &[&str]) -> VenConfig {
        VenConfig {
            id: VenId::from(id),
            tier: TierId(tier),
            products: products.iter().map(|p| ProductId::from(*p)).collect(),
            bom: Vec::new(),
            stocks: BTreeMap::new(),
            capacity: CapacityCalendar::new(Day(140), Day(160), 30, &[]).unwrap(),
            costs: costs(),
            overtime_limit: 0,
            subcontract_limit: 0,
            customers: customers.iter().map(|c| VenId::from(*c)).collect(),
            suppliers: suppliers.iter().map(|s| VenId::from(*s)).collect(),
        }
    }

    /// The worked example network: a tap assembly plant on tier 1 buying its
    /// three subassemblies from tier 2 plants.
    fn example_network() -> NetworkConfig {
        NetworkConfig {
            tiers: vec![
                vec![ven(
                    "tap-plant",
                    1,
                    &["PF"],
                    &["client-1"],
                    &["blister-1", "oring-1", "body-1"],
                )],
                vec![
                    ven("blister-1", 2, &["SCA"], &["tap-plant"], &["cardboard-1"]),
                    ven("oring-1", 2, &["SCBA"], &["tap-plant"], &["rubber-1"]),
                    ven("body-1", 2, &["SCBBA"], &["tap-plant"], &["metal-1"]),
                ],
            ],
            clients: vec![ClientStub {
                id: VenId::from("client-1"),
                accepts_counter_proposals: false,
            }],
            external_suppliers: vec![
                SupplierStub { id: VenId::from("cardboard-1"), products: vec![ProductId::from("SCAA")], flex_days: 0 },
                SupplierStub { id: VenId::from("rubber-1"), products: vec![ProductId::from("SCBAA")], flex_days: 0 },
                SupplierStub { id: VenId::from("metal-1"), products: vec![ProductId::from("SCBBAA")], flex_days: 0 },
            ],
        }
    }

    #[test]
    fn example_network_is_clean() {
        assert_eq!(validate_network(&example_network()), Vec::new());
    }

    #[test]
    fn self_supply_is_a_cycle() {
        let mut net = example_network();
        net.ven_mut(&VenId::from("tap-plant")).unwrap().suppliers.push(VenId::from("tap-plant"));
        assert_eq!(
            validate_network(&net),
            vec![Violation::Cycle { ven: VenId::from("tap-plant") }]
        );
    }

    #[test]
    fn skipping_a_tier_is_non_adjacent() {
        let mut net = example_network();
        // Link the tier 1 plant straight to a raw material supplier.
        net.ven_mut(&VenId::from("tap-plant")).unwrap().suppliers.push(VenId::from("cardboard-1"));
        assert_eq!(
            validate_network(&net),
            vec![Violation::NonAdjacentLink {
                ven: VenId::from("tap-plant"),
                referenced: VenId::from("cardboard-1"),
                expected: TierId(2),
                actual: TierId(3),
            }]
        );
    }

    #[test]
    fn unknown_partner_is_dangling() {
        let mut net = example_network();
        net.ven_mut(&VenId::from("blister-1")).unwrap().customers.push(VenId::from("ghost"));
        assert_eq!(
            validate_network(&net),
            vec![Violation::DanglingReference {
                ven: VenId::from("blister-1"),
                referenced: VenId::from("ghost"),
            }]
        );
    }

    #[test]
    fn duplicate_ids_are_reported_once_per_extra_declaration() {
        let mut net = example_network();
        let copy = net.ven(&VenId::from("oring-1")).unwrap().clone();
        net.tiers[1].push(copy);
        assert_eq!(
            validate_network(&net),
            vec![Violation::DuplicateId { id: VenId::from("oring-1") }]
        );
    }

    #[test]
    fn validation_is_idempotent_and_order_independent() {
        let mut net = example_network();
        net.ven_mut(&VenId::from("tap-plant")).unwrap().suppliers.push(VenId::from("tap-plant"));
        net.ven_mut(&VenId::from("blister-1")).unwrap().customers.push(VenId::from("ghost"));
        let first = validate_network(&net);
        let second = validate_network(&net);
        assert_eq!(first, second);

        let mut shuffled = net.clone();
        shuffled.tiers[1].reverse();
        assert_eq!(validate_network(&shuffled), first);
    }

    #[test]
    fn bom_children_in_declaration_order() {
        let mut tap = ven("tap-plant", 1, &["PF"], &[], &[]);
        tap.bom = vec![
            BomEdge { parent: ProductId::from("PF"), child: ProductId::from("SCBBA"), qty_per: 1, lead_offset: 4 },
            BomEdge { parent: ProductId::from("PF"), child: ProductId::from("SCBA"), qty_per: 2, lead_offset: 4 },
            BomEdge { parent: ProductId::from("PF"), child: ProductId::from("SCA"), qty_per: 1, lead_offset: 4 },
        ];
        let children = bom_children(&tap, &ProductId::from("PF")).unwrap();
        let summary: Vec<(&str, Units)> =
            children.iter().map(|e| (e.child.as_str(), e.qty_per)).collect();
        assert_eq!(summary, vec![("SCBBA", 1), ("SCBA", 2), ("SCA", 1)]);
    }

    #[test]
    fn bom_children_rejects_misrouted_product() {
        let tap = ven("tap-plant", 1, &["PF"], &[], &[]);
        let err = bom_children(&tap, &ProductId::from("SCA")).unwrap_err();
        assert_eq!(
            err,
            DomainError::NotAProducer { ven: VenId::from("tap-plant"), product: ProductId::from("SCA") }
        );
    }

    #[test]
    fn bom_cycle_detected() {
        let mut v = ven("loop-plant", 1, &["A"], &[], &[]);
        v.bom = vec![
            BomEdge { parent: ProductId::from("A"), child: ProductId::from("B"), qty_per: 1, lead_offset: 1 },
            BomEdge { parent: ProductId::from("B"), child: ProductId::from("A"), qty_per: 1, lead_offset: 1 },
        ];
        let net = NetworkConfig { tiers: vec![vec![v]], clients: vec![], external_suppliers: vec![] };
        assert_eq!(
            validate_network(&net),
            vec![Violation::BomCycle { ven: VenId::from("loop-plant"), product: ProductId::from("A") }]
        );
    }

    #[test]
    fn day_offsets_are_exact() {
        for d in [0u32, 1, 148, 365, 4000] {
            for k in [0u32, 1, 4, 150] {
                assert_eq!((Day(d) + k).checked_back(k), Some(Day(d)));
            }
        }
        assert_eq!(Day(3).checked_back(4), None);
    }

    #[test]
    fn capacity_calendar_lookups() {
        let cal = CapacityCalendar::new(Day(149), Day(152), 30, &[(Day(152), Day(152), 0)]).unwrap();
        assert_eq!(cal.capacity_on(Day(148)), 0);
        assert_eq!(cal.capacity_on(Day(149)), 30);
        assert_eq!(cal.capacity_on(Day(152)), 0);
        assert_eq!(cal.capacity_on(Day(153)), 0);
        assert_eq!(cal.total_through(Day(151)), 90);
    }

    #[test]
    fn scenario_shape_rules() {
        let good = Scenario {
            label: "s1".into(),
            lines: vec![DemandLine::new("SCA", Day(148), 40), DemandLine::new("SCA", Day(150), 20)],
        };
        assert!(good.well_formed());
        assert_eq!(good.total_qty(), 60);

        let unordered = Scenario {
            label: "s".into(),
            lines: vec![DemandLine::new("SCA", Day(150), 20), DemandLine::new("SCA", Day(148), 40)],
        };
        assert!(!unordered.well_formed());

        let zero = Scenario { label: "s".into(), lines: vec![DemandLine::new("SCA", Day(148), 0)] };
        assert!(!zero.well_formed());
    }
}
