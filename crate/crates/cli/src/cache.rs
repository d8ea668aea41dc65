//! Content-addressed store of fused maps, so repeated sweeps only redo the
//! metric step.

use std::path::PathBuf;

use maskfuse::codec;
use maskfuse::{ClassRegistry, SemanticMap};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default)]
pub struct FuseCache {
    dir: Option<PathBuf>,
}

impl FuseCache {
    pub fn disabled() -> Self {
        FuseCache { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        FuseCache { dir: Some(dir.into()) }
    }

    pub fn is_enabled(&self) -> bool {
        self.dir.is_some()
    }

    /// Key over the input digest and every parameter that changes the fused map.
    pub fn key(input_digest: &str, strategy: &str, threshold: f64, clip_to_box: bool) -> String {
        let mut h = Sha256::new();
        h.update(input_digest.as_bytes());
        h.update([0]);
        h.update(strategy.as_bytes());
        h.update([0]);
        h.update(threshold.to_bits().to_le_bytes());
        h.update([u8::from(clip_to_box)]);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn get_or_insert_with(
        &self,
        key: &str,
        registry: &ClassRegistry,
        fuse: impl FnOnce() -> maskfuse::Result<SemanticMap>,
    ) -> maskfuse::Result<SemanticMap> {
        let Some(dir) = &self.dir else {
            return fuse();
        };
        let path = dir.join(format!("{key}.png"));
        if path.is_file() {
            if let Ok(map) = codec::read_semantic(&path, registry) {
                return Ok(map);
            }
        }
        let map = fuse()?;
        codec::write_semantic(&map, &path)?;
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn keys_separate_parameters() {
        let a = FuseCache::key("d", "random:1", 0.2, false);
        assert_eq!(a, FuseCache::key("d", "random:1", 0.2, false));
        assert_ne!(a, FuseCache::key("d", "random:2", 0.2, false));
        assert_ne!(a, FuseCache::key("d", "random:1", 0.3, false));
        assert_ne!(a, FuseCache::key("d", "random:1", 0.2, true));
        assert_ne!(a, FuseCache::key("e", "random:1", 0.2, false));
    }

    #[test]
    fn second_lookup_hits_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FuseCache::at(dir.path());
        let reg = ClassRegistry::m4d();
        let map = SemanticMap::from_labels(2, 1, vec![0, 3]).unwrap();
        let calls = Cell::new(0);
        for _ in 0..3 {
            let got = cache
                .get_or_insert_with("k", &reg, || {
                    calls.set(calls.get() + 1);
                    Ok(map.clone())
                })
                .unwrap();
            assert_eq!(got, map);
        }
        assert_eq!(calls.get(), 1);
    }
}
