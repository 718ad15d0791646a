//! Built-in graph topologies and the three shopper classes.

use std::collections::BTreeMap;

use super::{CbmgEdge, CbmgGraph, CbmgState, CustomerClass, StateKind};

pub const BROWSE_THINK: f64 = 60.0;
pub const SEARCH_THINK: f64 = 60.0;
pub const CHECKOUT_THINK: f64 = 180.0;

fn thinking(name: &str, think_mean: f64, request: &str) -> CbmgState {
    let mut s = CbmgState::new(name, StateKind::Thinking);
    s.think_mean = think_mean;
    s.emits_request = Some(request.into());
    s
}

fn add_to_cart(name: &str) -> CbmgState {
    let mut s = CbmgState::new(name, StateKind::Instant);
    s.emits_request = Some("Add".into());
    s.adds_item = true;
    s.report_as = Some("AddToCart".into());
    s
}

fn exits() -> [CbmgState; 2] {
    let mut pay = CbmgState::new("ExitPay", StateKind::Absorbing);
    pay.purchase = true;
    [pay, CbmgState::new("ExitNoPay", StateKind::Absorbing)]
}

fn checkout() -> CbmgState {
    let mut s = thinking("Checkout", CHECKOUT_THINK, "Checkout");
    s.checkout = true;
    s
}

fn decision_group(k: u8) -> (CbmgState, [CbmgEdge; 3]) {
    let name = format!("Decide{k}");
    let edges = [
        CbmgEdge::labelled(&name, &format!("Continue{k}"), "Entry"),
        CbmgEdge::labelled(&name, &format!("Checkout{k}"), "Checkout"),
        CbmgEdge::labelled(&name, &format!("End{k}"), "ExitNoPay"),
    ];
    (CbmgState::new(&name, StateKind::Instant), edges)
}

impl CbmgGraph {
    /// Default topology. Browse and Search both lead to a find/not-find
    /// outcome; a find leads to the add-to-cart decision. Decision group 1
    /// follows a miss, group 2 an added item, group 3 a declined item.
    pub fn standard() -> Self {
        let mut states = vec![
            CbmgState::new("Entry", StateKind::Entry),
            thinking("Browse", BROWSE_THINK, "Browse"),
            thinking("Search", SEARCH_THINK, "Search"),
            CbmgState::new("Select", StateKind::Instant),
            add_to_cart("AddToCart"),
        ];
        let mut edges = vec![
            CbmgEdge::labelled("Entry", "Browse", "Browse"),
            CbmgEdge::labelled("Entry", "Search", "Search"),
            CbmgEdge::labelled("Browse", "Found", "Select"),
            CbmgEdge::labelled("Browse", "NotFound", "Decide1"),
            CbmgEdge::labelled("Search", "Found", "Select"),
            CbmgEdge::labelled("Search", "NotFound", "Decide1"),
            CbmgEdge::labelled("Select", "Add", "AddToCart"),
            CbmgEdge::labelled("Select", "NotAdd", "Decide3"),
            CbmgEdge::fixed("AddToCart", 1.0, "Decide2"),
        ];
        for k in 1..=3 {
            let (s, e) = decision_group(k);
            states.push(s);
            edges.extend(e);
        }
        states.push(checkout());
        edges.push(CbmgEdge::fixed("Checkout", 1.0, "ExitPay"));
        states.extend(exits());
        CbmgGraph {
            entry: "Entry".into(),
            states,
            edges,
        }
    }

    /// Alternative topology where each decision group hangs off one branch:
    /// group 1 after Browse, group 2 after a successful Search, group 3
    /// after an unsuccessful Search. Browse adds to the cart directly.
    pub fn branch_groups() -> Self {
        let mut states = vec![
            CbmgState::new("Entry", StateKind::Entry),
            thinking("Browse", BROWSE_THINK, "Browse"),
            thinking("Search", SEARCH_THINK, "Search"),
            CbmgState::new("Found", StateKind::Instant),
            add_to_cart("AddFromBrowse"),
            add_to_cart("AddFromSearch"),
        ];
        let mut edges = vec![
            CbmgEdge::labelled("Entry", "Browse", "Browse"),
            CbmgEdge::labelled("Entry", "Search", "Search"),
            CbmgEdge::labelled("Browse", "Add", "AddFromBrowse"),
            CbmgEdge::labelled("Browse", "NotAdd", "Decide1"),
            CbmgEdge::labelled("Search", "Found", "Found"),
            CbmgEdge::labelled("Search", "NotFound", "Decide3"),
            CbmgEdge::labelled("Found", "Add", "AddFromSearch"),
            CbmgEdge::labelled("Found", "NotAdd", "Decide2"),
            CbmgEdge::fixed("AddFromBrowse", 1.0, "Decide1"),
            CbmgEdge::fixed("AddFromSearch", 1.0, "Decide2"),
        ];
        for k in 1..=3 {
            let (s, e) = decision_group(k);
            states.push(s);
            edges.extend(e);
        }
        states.push(checkout());
        edges.push(CbmgEdge::fixed("Checkout", 1.0, "ExitPay"));
        states.extend(exits());
        CbmgGraph {
            entry: "Entry".into(),
            states,
            edges,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "standard" | "default" => Some(Self::standard()),
            "branch-groups" | "branch_groups" => Some(Self::branch_groups()),
            _ => None,
        }
    }
}

impl CustomerClass {
    /// Builds a class from per-class browse/found/add parameters. The three
    /// continue/checkout/end groups share the same values.
    pub fn from_table(
        name: &str,
        p_browse: f64,
        p_found: f64,
        p_add: f64,
        continue_checkout_end: (f64, f64, f64),
    ) -> Self {
        let (cont, chk, end) = continue_checkout_end;
        let mut probs = BTreeMap::new();
        probs.insert("Browse".into(), p_browse);
        probs.insert("Search".into(), 1.0 - p_browse);
        probs.insert("Found".into(), p_found);
        probs.insert("NotFound".into(), 1.0 - p_found);
        probs.insert("Add".into(), p_add);
        probs.insert("NotAdd".into(), 1.0 - p_add);
        for k in 1..=3 {
            probs.insert(format!("Continue{k}"), cont);
            probs.insert(format!("Checkout{k}"), chk);
            probs.insert(format!("End{k}"), end);
        }
        CustomerClass {
            name: name.into(),
            probs,
            think_means: BTreeMap::new(),
        }
    }

    pub fn rare() -> Self {
        Self::from_table("rare", 0.50, 0.10, 0.10, (0.10, 0.10, 0.80))
    }

    pub fn ordinary() -> Self {
        Self::from_table("ordinary", 0.50, 0.50, 0.50, (0.33, 0.34, 0.33))
    }

    pub fn frequent() -> Self {
        Self::from_table("frequent", 0.50, 0.90, 0.90, (0.50, 0.45, 0.05))
    }

    pub fn presets() -> Vec<Self> {
        vec![Self::rare(), Self::ordinary(), Self::frequent()]
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "rare" => Some(Self::rare()),
            "ordinary" => Some(Self::ordinary()),
            "frequent" => Some(Self::frequent()),
            _ => None,
        }
    }
}
