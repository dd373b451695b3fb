//! Thread-safe cache of factorized `Ξ` matrices.

use slowfast_core::drift::{XiFactor, XiKey, XiStore};
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

/// Default memory budget for cached factors.
pub const DEFAULT_BUDGET_BYTES: usize = 256 << 20;

/// Read-mostly map shared by all replications.
///
/// Entries are pure functions of their key, so a racing duplicate insert
/// stores the same bits and results do not depend on scheduling. Once the
/// budget is spent new factors are no longer kept.
#[derive(Debug)]
pub struct SharedXiStore {
    map: RwLock<HashMap<XiKey, Arc<XiFactor>>>,
    budget: usize,
    used: AtomicUsize,
}

impl Default for SharedXiStore {
    fn default() -> Self {
        Self::with_budget(DEFAULT_BUDGET_BYTES)
    }
}

impl SharedXiStore {
    pub fn with_budget(bytes: usize) -> Self {
        SharedXiStore { map: RwLock::new(HashMap::new()), budget: bytes, used: AtomicUsize::new(0) }
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("xi store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl XiStore for SharedXiStore {
    fn get(&self, key: &XiKey) -> Option<Arc<XiFactor>> {
        self.map.read().expect("xi store poisoned").get(key).cloned()
    }

    fn insert(&self, key: XiKey, value: Arc<XiFactor>) {
        let size = std::mem::size_of::<f64>() * (value.cholesky.l_dirty().len() + value.mean.len());
        if self.used.load(Ordering::Relaxed) + size > self.budget {
            return;
        }
        let mut map = self.map.write().expect("xi store poisoned");
        if map.insert(key, value).is_none() {
            self.used.fetch_add(size, Ordering::Relaxed);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use slowfast_core::drift::{build_xi, XiConfig};
    use slowfast_core::{ConstantSigmaModel, HurstIndex};

    fn entry(theta: f64) -> (XiKey, Arc<XiFactor>) {
        let avg = ConstantSigmaModel::new().averaged();
        let h = HurstIndex::new(0.85).unwrap();
        let cfg = XiConfig::default();
        let f = build_xi(&avg, &[theta], h, 4, 1.0, &cfg).unwrap().factor().unwrap();
        (XiKey::new(&[theta], h, 4, 1.0, &cfg), Arc::new(f))
    }

    #[test]
    fn stores_and_returns() {
        let store = SharedXiStore::default();
        let (k, v) = entry(1.0);
        store.insert(k.clone(), v);
        assert_eq!(store.len(), 1);
        assert!(store.get(&k).is_some());
        assert!(store.get(&entry(1.5).0).is_none());
    }

    #[test]
    fn budget_caps_growth() {
        let (k1, v1) = entry(1.0);
        let (k2, v2) = entry(1.5);
        let store = SharedXiStore::with_budget(8 * 20);
        store.insert(k1, v1);
        store.insert(k2, v2);
        assert_eq!(store.len(), 1);
    }
}
