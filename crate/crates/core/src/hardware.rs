//! Device inventory and the hardware-support check that gates loading.

use thiserror::Error;

use crate::catalog::ModuleRecord;

/// First line of every inventory file.
pub const INVENTORY_HEADER: &str = "HWINV v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InventoryError {
    #[error("missing `{INVENTORY_HEADER}` header")]
    MalformedInventory,
}

impl InventoryError {
    pub fn code(&self) -> &'static str {
        "malformed-inventory"
    }
}

/// Device descriptions as a hardware-information tool would print them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HardwareInventory {
    devices: Vec<String>,
}

impl HardwareInventory {
    /// Builds an inventory, trimming entries and dropping empty ones.
    pub fn new<I, S>(devices: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        HardwareInventory {
            devices: devices
                .into_iter()
                .map(|d| d.as_ref().trim().to_string())
                .filter(|d| !d.is_empty())
                .collect(),
        }
    }

    pub fn devices(&self) -> &[String] {
        &self.devices
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(INVENTORY_HEADER);
        out.push('\n');
        for d in &self.devices {
            out.push_str(d);
            out.push('\n');
        }
        out
    }
}

pub fn parse_inventory(text: &str) -> Result<HardwareInventory, InventoryError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(INVENTORY_HEADER) {
        return Err(InventoryError::MalformedInventory);
    }
    Ok(HardwareInventory::new(
        lines.map(str::trim).filter(|l| !l.starts_with('#')),
    ))
}

/// True if the module is ungated (no tags) or one of its tags occurs as a
/// whole word, ignoring case, in some device string.
pub fn check_hardware_support(module: &ModuleRecord, inventory: &HardwareInventory) -> bool {
    DeviceMatcher::new(inventory).supports(module)
}

/// Inventory pre-normalised for repeated support checks.
#[derive(Debug, Clone)]
pub struct DeviceMatcher {
    devices: Vec<String>,
}

impl DeviceMatcher {
    pub fn new(inventory: &HardwareInventory) -> Self {
        DeviceMatcher {
            devices: inventory.devices.iter().map(|d| d.to_lowercase()).collect(),
        }
    }

    pub fn supports(&self, module: &ModuleRecord) -> bool {
        if module.hw_tags.is_empty() {
            return true;
        }
        module.hw_tags.iter().any(|tag| {
            let tag = tag.to_lowercase();
            self.devices.iter().any(|d| contains_word(d, &tag))
        })
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn contains_word(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    haystack.match_indices(needle).any(|(at, _)| {
        let before = haystack[..at].chars().next_back();
        let after = haystack[at + needle.len()..].chars().next();
        !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char)
    })
}
