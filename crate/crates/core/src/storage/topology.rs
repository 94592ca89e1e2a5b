//! Component graph: clients feed balancers, balancers feed controllers,
//! controllers feed links and links feed storage devices.

use std::collections::HashMap;

use super::spec::{CpuSpec, LinkSpec, StorageSpec};
use super::ModelError;
use crate::workload::BalancerPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentKind {
    Client,
    Balancer(BalancerPolicy),
    Controller(CpuSpec),
    Link(LinkSpec),
    Storage(StorageSpec),
}

impl ComponentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ComponentKind::Client => "client",
            ComponentKind::Balancer(_) => "balancer",
            ComponentKind::Controller(_) => "controller",
            ComponentKind::Link(_) => "link",
            ComponentKind::Storage(_) => "storage",
        }
    }

    // Position along the client -> device pipeline.
    fn tier(&self) -> u8 {
        match self {
            ComponentKind::Client => 0,
            ComponentKind::Balancer(_) => 1,
            ComponentKind::Controller(_) => 2,
            ComponentKind::Link(_) => 3,
            ComponentKind::Storage(_) => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
}

/// A full route for one request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Path {
    pub balancer: ComponentId,
    pub controller: ComponentId,
    pub link: ComponentId,
    pub device: ComponentId,
}

impl Path {
    pub fn contains(&self, id: ComponentId) -> bool {
        self.balancer == id || self.controller == id || self.link == id || self.device == id
    }
}

#[derive(Debug, Clone, Default)]
pub struct TopologyBuilder {
    components: Vec<Component>,
    edges: Vec<(ComponentId, ComponentId)>,
    by_name: HashMap<String, ComponentId>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ComponentKind) -> Result<ComponentId, ModelError> {
        let name = name.into();
        match &kind {
            ComponentKind::Controller(c) => c.validate()?,
            ComponentKind::Link(l) => l.validate()?,
            ComponentKind::Storage(s) => s.validate()?,
            ComponentKind::Client | ComponentKind::Balancer(_) => {}
        }
        if self.by_name.contains_key(&name) {
            return Err(ModelError::InvalidTopology(format!(
                "duplicate component `{name}`"
            )));
        }
        let id = ComponentId(self.components.len());
        self.by_name.insert(name.clone(), id);
        self.components.push(Component { name, kind });
        Ok(id)
    }

    pub fn connect(&mut self, from: &str, to: &str) -> Result<(), ModelError> {
        let a = *self
            .by_name
            .get(from)
            .ok_or_else(|| ModelError::UnknownComponent(from.to_string()))?;
        let b = *self
            .by_name
            .get(to)
            .ok_or_else(|| ModelError::UnknownComponent(to.to_string()))?;
        let (ka, kb) = (&self.components[a.0].kind, &self.components[b.0].kind);
        if ka.tier() + 1 != kb.tier() {
            return Err(ModelError::InvalidTopology(format!(
                "cannot connect {} `{from}` to {} `{to}`",
                ka.label(),
                kb.label()
            )));
        }
        if !self.edges.contains(&(a, b)) {
            self.edges.push((a, b));
        }
        Ok(())
    }

    pub fn build(self) -> Result<Topology, ModelError> {
        let mut successors = vec![Vec::new(); self.components.len()];
        for &(a, b) in &self.edges {
            successors[a.0].push(b);
        }
        for s in &mut successors {
            s.sort();
        }
        let topo = Topology {
            components: self.components,
            successors,
            by_name: self.by_name,
        };
        let clients = topo.ids_of(|k| matches!(k, ComponentKind::Client));
        if clients.is_empty() {
            return Err(ModelError::InvalidTopology("no client components".into()));
        }
        for c in clients {
            if topo.balancer_of(c).is_none() {
                return Err(ModelError::InvalidTopology(format!(
                    "client `{}` is not connected to a balancer",
                    topo.name(c)
                )));
            }
            let b = topo.balancer_of(c).unwrap();
            if topo.paths_from(b).next().is_none() {
                return Err(ModelError::InvalidTopology(format!(
                    "client `{}` cannot reach any storage device",
                    topo.name(c)
                )));
            }
        }
        Ok(topo)
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    components: Vec<Component>,
    successors: Vec<Vec<ComponentId>>,
    by_name: HashMap<String, ComponentId>,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, id: ComponentId) -> &Component {
        &self.components[id.0]
    }

    pub fn name(&self, id: ComponentId) -> &str {
        &self.components[id.0].name
    }

    pub fn kind(&self, id: ComponentId) -> &ComponentKind {
        &self.components[id.0].kind
    }

    pub fn id(&self, name: &str) -> Result<ComponentId, ModelError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownComponent(name.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = ComponentId> {
        (0..self.components.len()).map(ComponentId)
    }

    pub fn successors(&self, id: ComponentId) -> &[ComponentId] {
        &self.successors[id.0]
    }

    pub fn ids_of(&self, pred: impl Fn(&ComponentKind) -> bool) -> Vec<ComponentId> {
        self.ids().filter(|&i| pred(self.kind(i))).collect()
    }

    pub fn clients(&self) -> Vec<ComponentId> {
        self.ids_of(|k| matches!(k, ComponentKind::Client))
    }

    pub fn balancers(&self) -> Vec<ComponentId> {
        self.ids_of(|k| matches!(k, ComponentKind::Balancer(_)))
    }

    pub fn controllers(&self) -> Vec<ComponentId> {
        self.ids_of(|k| matches!(k, ComponentKind::Controller(_)))
    }

    pub fn links(&self) -> Vec<ComponentId> {
        self.ids_of(|k| matches!(k, ComponentKind::Link(_)))
    }

    pub fn devices(&self) -> Vec<ComponentId> {
        self.ids_of(|k| matches!(k, ComponentKind::Storage(_)))
    }

    /// First balancer (by id) a client is wired to.
    pub fn balancer_of(&self, client: ComponentId) -> Option<ComponentId> {
        self.successors(client).first().copied()
    }

    pub fn cpu(&self, id: ComponentId) -> Option<&CpuSpec> {
        match self.kind(id) {
            ComponentKind::Controller(c) => Some(c),
            _ => None,
        }
    }

    pub fn link(&self, id: ComponentId) -> Option<&LinkSpec> {
        match self.kind(id) {
            ComponentKind::Link(l) => Some(l),
            _ => None,
        }
    }

    pub fn storage(&self, id: ComponentId) -> Option<&StorageSpec> {
        match self.kind(id) {
            ComponentKind::Storage(s) => Some(s),
            _ => None,
        }
    }

    pub fn policy(&self, balancer: ComponentId) -> Option<BalancerPolicy> {
        match self.kind(balancer) {
            ComponentKind::Balancer(p) => Some(*p),
            _ => None,
        }
    }

    /// Every balancer -> controller -> link -> device path, in id order.
    pub fn paths_from(&self, balancer: ComponentId) -> impl Iterator<Item = Path> + '_ {
        self.successors(balancer).iter().flat_map(move |&controller| {
            self.successors(controller).iter().flat_map(move |&link| {
                self.successors(link).iter().map(move |&device| Path {
                    balancer,
                    controller,
                    link,
                    device,
                })
            })
        })
    }
}
