//! Scenario files: one JSON document describing the network and the
//! scripted orders to run against it.
//!
//! Tiers are nested arrays, outermost first; a node's tier number comes
//! from its position, so the file cannot contradict itself. Money fields
//! are strings ("2.00") to keep cents exact, days are plain numbers.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::domain::{
    BomEdge, CapacityCalendar, ClientStub, CostModel, Day, DemandLine, DomainError,
    NetworkConfig, ProductId, SupplierStub, TierId, Units, VenConfig, VenId,
};
use crate::protocol::OrderId;
use crate::simulator::{OrderSpec, RunSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("bad spec file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("node {ven}: {source}")]
    Calendar { ven: String, source: DomainError },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    tiers: Vec<Vec<RawVen>>,
    clients: Vec<RawClient>,
    #[serde(default)]
    external_suppliers: Vec<RawSupplier>,
    #[serde(default)]
    orders: Vec<RawOrder>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVen {
    id: String,
    products: Vec<String>,
    #[serde(default)]
    bom: Vec<RawBom>,
    #[serde(default)]
    stocks: BTreeMap<String, Units>,
    capacity: RawCapacity,
    costs: CostModel,
    #[serde(default)]
    overtime_limit: Units,
    #[serde(default)]
    subcontract_limit: Units,
    #[serde(default)]
    customers: Vec<String>,
    #[serde(default)]
    suppliers: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBom {
    parent: String,
    child: String,
    qty_per: Units,
    lead_offset: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCapacity {
    start: u32,
    end: u32,
    #[serde(default)]
    base: Units,
    #[serde(default)]
    overrides: Vec<RawOverride>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverride {
    from: u32,
    to: u32,
    units: Units,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClient {
    id: String,
    #[serde(default)]
    accepts_counter_proposals: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSupplier {
    id: String,
    products: Vec<String>,
    #[serde(default)]
    flex_days: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrder {
    id: String,
    day: u32,
    client: String,
    supplier: String,
    line: DemandLine,
}

pub fn load_spec(text: &str) -> Result<RunSpec, ConfigError> {
    let raw: RawSpec = serde_json::from_str(text)?;

    let mut tiers = Vec::with_capacity(raw.tiers.len());
    for (i, tier) in raw.tiers.into_iter().enumerate() {
        let tier_id = TierId(i as u32 + 1);
        let mut nodes = Vec::with_capacity(tier.len());
        for v in tier {
            let overrides: Vec<(Day, Day, Units)> = v
                .capacity
                .overrides
                .iter()
                .map(|o| (Day(o.from), Day(o.to), o.units))
                .collect();
            let capacity = CapacityCalendar::new(
                Day(v.capacity.start),
                Day(v.capacity.end),
                v.capacity.base,
                &overrides,
            )
            .map_err(|source| ConfigError::Calendar { ven: v.id.clone(), source })?;
            nodes.push(VenConfig {
                id: VenId::new(v.id),
                tier: tier_id,
                products: v.products.into_iter().map(ProductId::new).collect(),
                bom: v
                    .bom
                    .into_iter()
                    .map(|b| BomEdge {
                        parent: ProductId::new(b.parent),
                        child: ProductId::new(b.child),
                        qty_per: b.qty_per,
                        lead_offset: b.lead_offset,
                    })
                    .collect(),
                stocks: v.stocks.into_iter().map(|(p, u)| (ProductId::new(p), u)).collect(),
                capacity,
                costs: v.costs,
                overtime_limit: v.overtime_limit,
                subcontract_limit: v.subcontract_limit,
                customers: v.customers.into_iter().map(VenId::new).collect(),
                suppliers: v.suppliers.into_iter().map(VenId::new).collect(),
            });
        }
        tiers.push(nodes);
    }

    let network = NetworkConfig {
        tiers,
        clients: raw
            .clients
            .into_iter()
            .map(|c| ClientStub {
                id: VenId::new(c.id),
                accepts_counter_proposals: c.accepts_counter_proposals,
            })
            .collect(),
        external_suppliers: raw
            .external_suppliers
            .into_iter()
            .map(|s| SupplierStub {
                id: VenId::new(s.id),
                products: s.products.into_iter().map(ProductId::new).collect(),
                flex_days: s.flex_days,
            })
            .collect(),
    };
    let orders = raw
        .orders
        .into_iter()
        .map(|o| OrderSpec {
            id: OrderId::new(o.id),
            day: Day(o.day),
            client: VenId::new(o.client),
            supplier: VenId::new(o.supplier),
            line: o.line,
        })
        .collect();
    Ok(RunSpec { network, orders })
}
