//! User input bundles: the four context documents that seed refinement.
//!
//! A bundle directory holds a `manifest` file (TOML) naming the documents,
//! the target format, and the target to direct at:
//!
//! ```toml
//! target_format = "mini-doc"
//! target_id = "mini-doc-parser"
//!
//! [documents]            # all entries optional
//! project_intro = "intro.txt"
//! driver_source = "driver.c"
//! cve_description = "cve.txt"
//! patch = "fix.patch"
//!
//! [cve]
//! id = "CVE-TEST-0003"
//! vuln_class = "memory-corruption"
//! ```
//!
//! Documents omitted from the manifest load as empty with an absence flag,
//! so ablations like "no patch" are first-class experiment variables. The
//! patch is opaque text handed to the refinement backend; nothing parses it.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::formats::FormatTag;
use crate::targets;

pub const MANIFEST_FILE: &str = "manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VulnClass {
    BufferOverflow,
    IntegerOverflow,
    UseAfterFree,
    NullDereference,
    DenialOfService,
    MemoryCorruption,
    LogicError,
    Other,
}

impl VulnClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            VulnClass::BufferOverflow => "buffer-overflow",
            VulnClass::IntegerOverflow => "integer-overflow",
            VulnClass::UseAfterFree => "use-after-free",
            VulnClass::NullDereference => "null-dereference",
            VulnClass::DenialOfService => "denial-of-service",
            VulnClass::MemoryCorruption => "memory-corruption",
            VulnClass::LogicError => "logic-error",
            VulnClass::Other => "other",
        }
    }
}

impl fmt::Display for VulnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VulnClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidBundle(format!("unknown vuln_class {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CveDetails {
    pub id: String,
    pub description: String,
    pub vuln_class: VulnClass,
}

/// Which of the four documents were absent from the manifest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsentFlags {
    pub project_intro_absent: bool,
    pub driver_source_absent: bool,
    pub cve_description_absent: bool,
    pub patch_absent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserInputBundle {
    pub bundle_id: String,
    pub project_intro: String,
    pub driver_source: String,
    pub cve: CveDetails,
    pub patch: String,
    pub target_format: FormatTag,
    pub target_id: String,
    pub absent: AbsentFlags,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    target_format: String,
    target_id: String,
    #[serde(default)]
    bundle_id: Option<String>,
    #[serde(default)]
    documents: ManifestDocuments,
    cve: ManifestCve,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDocuments {
    #[serde(default)]
    project_intro: Option<String>,
    #[serde(default)]
    driver_source: Option<String>,
    #[serde(default)]
    cve_description: Option<String>,
    #[serde(default)]
    patch: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestCve {
    id: String,
    vuln_class: String,
}

/// Load and validate a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<UserInputBundle> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let text = std::fs::read_to_string(&manifest_path)?;
    let manifest: Manifest = toml::from_str(&text)
        .map_err(|e| Error::Toml(format!("{}: {e}", manifest_path.display())))?;

    let target_format: FormatTag = manifest.target_format.parse()?;
    let target = targets::find_target(&manifest.target_id)?;
    if target.format != target_format {
        return Err(Error::InvalidBundle(format!(
            "target {} consumes {}, but the bundle declares {}",
            target.target_id, target.format, target_format
        )));
    }
    if manifest.cve.id.trim().is_empty() {
        return Err(Error::InvalidBundle("cve.id must be non-empty".to_string()));
    }
    let vuln_class: VulnClass = manifest.cve.vuln_class.parse()?;

    let read_doc = |name: &Option<String>| -> Result<(String, bool)> {
        match name {
            Some(rel) => Ok((std::fs::read_to_string(dir.join(rel))?, false)),
            None => Ok((String::new(), true)),
        }
    };
    let (project_intro, project_intro_absent) = read_doc(&manifest.documents.project_intro)?;
    let (driver_source, driver_source_absent) = read_doc(&manifest.documents.driver_source)?;
    let (description, cve_description_absent) = read_doc(&manifest.documents.cve_description)?;
    let (patch, patch_absent) = read_doc(&manifest.documents.patch)?;

    if project_intro.is_empty() && driver_source.is_empty() && description.is_empty() && patch.is_empty()
    {
        return Err(Error::EmptyBundle);
    }

    let bundle_id = manifest.bundle_id.unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "bundle".to_string())
    });

    Ok(UserInputBundle {
        bundle_id,
        project_intro,
        driver_source,
        cve: CveDetails {
            id: manifest.cve.id,
            description,
            vuln_class,
        },
        patch,
        target_format,
        target_id: target.target_id.to_string(),
        absent: AbsentFlags {
            project_intro_absent,
            driver_source_absent,
            cve_description_absent,
            patch_absent,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    fn write_fixture(dir: &Path, manifest: &str) {
        fs::write(dir.join(MANIFEST_FILE), manifest).unwrap();
        fs::write(dir.join("intro.txt"), "MiniDoc archives notes.").unwrap();
        fs::write(dir.join("driver.c"), "int main(void) { return 0; }").unwrap();
        fs::write(dir.join("cve.txt"), "Crafted key corrupts state.").unwrap();
        fs::write(dir.join("fix.patch"), "- trust(key)\n+ verify(key)").unwrap();
    }

    const FULL_MANIFEST: &str = r#"
target_format = "mini-doc"
target_id = "mini-doc-parser"

[documents]
project_intro = "intro.txt"
driver_source = "driver.c"
cve_description = "cve.txt"
patch = "fix.patch"

[cve]
id = "CVE-TEST-0003"
vuln_class = "memory-corruption"
"#;

    #[test]
    fn full_fixture_loads_all_four_documents() {
        let dir = TempDir::new().unwrap();
        write_fixture(dir.path(), FULL_MANIFEST);
        let bundle = load_bundle(dir.path()).unwrap();
        assert_eq!(bundle.project_intro, "MiniDoc archives notes.");
        assert_eq!(bundle.driver_source, "int main(void) { return 0; }");
        assert_eq!(bundle.cve.description, "Crafted key corrupts state.");
        assert_eq!(bundle.patch, "- trust(key)\n+ verify(key)");
        assert_eq!(bundle.cve.id, "CVE-TEST-0003");
        assert_eq!(bundle.target_format, FormatTag::MiniDoc);
        assert_eq!(bundle.absent, AbsentFlags::default());
    }

    #[test]
    fn omitted_patch_loads_empty_with_flag() {
        let dir = TempDir::new().unwrap();
        let manifest = FULL_MANIFEST.replace("patch = \"fix.patch\"\n", "");
        write_fixture(dir.path(), &manifest);
        let bundle = load_bundle(dir.path()).unwrap();
        assert_eq!(bundle.patch, "");
        assert!(bundle.absent.patch_absent);
        assert!(!bundle.absent.project_intro_absent);
    }

    #[test]
    fn unknown_format_is_rejected() {
        let dir = TempDir::new().unwrap();
        let manifest = FULL_MANIFEST.replace("mini-doc\"", "bogus\"");
        write_fixture(dir.path(), &manifest);
        assert!(matches!(
            load_bundle(dir.path()),
            Err(Error::UnknownFormat(_))
        ));
    }

    #[test]
    fn unknown_target_is_rejected() {
        let dir = TempDir::new().unwrap();
        let manifest = FULL_MANIFEST.replace("mini-doc-parser", "no-such-parser");
        write_fixture(dir.path(), &manifest);
        assert!(matches!(
            load_bundle(dir.path()),
            Err(Error::UnknownTarget(_))
        ));
    }

    #[test]
    fn missing_manifest_is_its_own_error() {
        let dir = TempDir::new().unwrap();
        assert!(matches!(
            load_bundle(dir.path()),
            Err(Error::MissingManifest(_))
        ));
    }

    #[test]
    fn all_documents_empty_is_rejected() {
        let dir = TempDir::new().unwrap();
        let manifest = r#"
target_format = "mini-doc"
target_id = "mini-doc-parser"

[cve]
id = "CVE-TEST-0003"
vuln_class = "other"
"#;
        fs::write(dir.path().join(MANIFEST_FILE), manifest).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::EmptyBundle)));
    }

    #[test]
    fn loading_twice_yields_identical_bundles() {
        let dir = TempDir::new().unwrap();
        write_fixture(dir.path(), FULL_MANIFEST);
        assert_eq!(load_bundle(dir.path()).unwrap(), load_bundle(dir.path()).unwrap());
    }

    #[test]
    fn bundle_serde_round_trip_is_lossless() {
        let dir = TempDir::new().unwrap();
        write_fixture(dir.path(), FULL_MANIFEST);
        let bundle = load_bundle(dir.path()).unwrap();
        let json = serde_json::to_string(&bundle).unwrap();
        let back: UserInputBundle = serde_json::from_str(&json).unwrap();
        assert_eq!(bundle, back);
    }
}
