//! Content-addressed store of exportable products.
//!
//! Every supported format of a product is rendered once at creation and
//! written to `{data_dir}/products/{id}.{ext}`. The id is the SHA-256 of
//! the kind and all renderings, so equal results share one id.

use std::fs;
use std::path::{Path, PathBuf};

use nightpulse_core::export::{ExportFormat, Product};
use nightpulse_core::{Error, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct ProductStore {
    dir: PathBuf,
}

impl ProductStore {
    pub fn new(data_dir: &Path) -> Self {
        ProductStore { dir: data_dir.join("products") }
    }

    /// Renders and stores `product`, returning its id.
    pub fn put(&self, product: &Product) -> Result<String> {
        let renders: Vec<(ExportFormat, Vec<u8>)> =
            product.formats().iter().map(|&f| product.render(f).map(|b| (f, b))).collect::<Result<_>>()?;
        let mut h = Sha256::new();
        h.update(product.kind().as_bytes());
        for (f, bytes) in &renders {
            h.update(f.as_str().as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        let id = hex::encode(h.finalize());
        fs::create_dir_all(&self.dir)?;
        for (f, bytes) in &renders {
            let dest = self.path(&id, *f);
            if dest.exists() {
                continue;
            }
            let tmp = self.dir.join(format!("{id}.{}.tmp", f.extension()));
            fs::write(&tmp, bytes)?;
            fs::rename(&tmp, &dest)?;
        }
        Ok(id)
    }

    /// Stored bytes of product `id` in `format`.
    pub fn get(&self, id: &str, format: ExportFormat) -> Result<Vec<u8>> {
        if id.len() != 64 || !id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::NotFound(format!("product {id}")));
        }
        match fs::read(self.path(id, format)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                if self.exists(id) {
                    Err(Error::UnsupportedFormat(format!("product {id} is not available as {format}")))
                } else {
                    Err(Error::NotFound(format!("product {id}")))
                }
            }
            Err(e) => Err(e.into()),
        }
    }

    fn exists(&self, id: &str) -> bool {
        [ExportFormat::GeoJson, ExportFormat::Csv, ExportFormat::GeoTiff].iter().any(|&f| self.path(id, f).exists())
    }

    fn path(&self, id: &str, format: ExportFormat) -> PathBuf {
        self.dir.join(format!("{id}.{}", format.extension()))
    }
}
