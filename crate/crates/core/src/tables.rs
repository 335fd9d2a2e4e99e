//! Twelve built-in reference tariffs.
//!
//! All share `lambda = 0.1`, exponential claims with mean 2, unit exponential
//! accident proneness and a four-level scale with penalties `(1, 2, 3, 3)`.
//! Tables 1-9 split claims at `(1, 2, 4)`, tables 10-12 at `(0.3, 1.2, 2.8)`.

use crate::config::{Allocation, Tariff, TariffConfig};
use crate::error::{Error, Result};
use crate::report::{tariff_table, Table};

const COARSE: &str = r#"
lambda = 0.1
thresholds = [1.0, 2.0, 4.0]

[severity]
kind = "exponential"
mean = 2.0

[mixing]
kind = "exponential_unit"

[scale]
levels = 4
penalties = [1, 2, 3, 3]
"#;

const FINE: &str = r#"
lambda = 0.1
thresholds = [0.3, 1.2, 2.8]

[severity]
kind = "exponential"
mean = 2.0

[mixing]
kind = "exponential_unit"

[scale]
levels = 4
penalties = [1, 2, 3, 3]
"#;

#[derive(Debug, Clone, Copy)]
pub struct ReferenceTable {
    pub number: usize,
    pub caption: &'static str,
    base: &'static str,
    deductible: &'static str,
}

impl ReferenceTable {
    pub fn config_text(&self) -> String {
        format!("{}\n[deductible]\n{}", self.base, self.deductible)
    }

    pub fn config(&self) -> Result<TariffConfig> {
        TariffConfig::from_toml_str(&self.config_text())
    }

    pub fn file_name(&self) -> String {
        format!("table_{:02}.csv", self.number)
    }
}

pub const TABLES: [ReferenceTable; 12] = [
    ReferenceTable {
        number: 1,
        caption: "proportional deductibles at the top level, alpha_3 = 0.05",
        base: COARSE,
        deductible: "principle = \"proportional_top\"\nalphas = 0.05\n",
    },
    ReferenceTable {
        number: 2,
        caption: "proportional deductibles at the top level, alpha_3 = 0.13",
        base: COARSE,
        deductible: "principle = \"proportional_top\"\nalphas = 0.13\n",
    },
    ReferenceTable {
        number: 3,
        caption: "large claims first at the top level, alpha_3 = 0.05",
        base: COARSE,
        deductible: "principle = \"greedy_top\"\nalphas = 0.05\n",
    },
    ReferenceTable {
        number: 4,
        caption: "large claims first at the top level, alpha_3 = 0.13",
        base: COARSE,
        deductible: "principle = \"greedy_top\"\nalphas = 0.13\n",
    },
    ReferenceTable {
        number: 5,
        caption: "largest claim type only, alpha = (0.06, 0.13, 0.24)",
        base: COARSE,
        deductible: "principle = \"single_type\"\nalphas = [0.06, 0.13, 0.24]\n",
    },
    ReferenceTable {
        number: 6,
        caption: "largest claim type only, alpha = (0.24, 0.25, 0.26)",
        base: COARSE,
        deductible: "principle = \"single_type\"\nalphas = [0.24, 0.25, 0.26]\n",
    },
    ReferenceTable {
        number: 7,
        caption: "d_2 fixed at 1.1, d_3 solved, alpha = (0.24, 0.25, 0.26)",
        base: COARSE,
        deductible: r#"principle = "manual"
alphas = [0.24, 0.25, 0.26]
manual = [[0, 0, 1.1, "free"], [0, 0, 1.1, "free"], [0, 0, 1.1, "free"]]
"#,
    },
    ReferenceTable {
        number: 8,
        caption: "d_2 rising with the level, d_3 solved, alpha = (0.35, 0.40, 0.45)",
        base: COARSE,
        deductible: r#"principle = "manual"
alphas = [0.35, 0.40, 0.45]
manual = [[0, 0, 1.5, "free"], [0, 0, 1.6, "free"], [0, 0, 1.7, "free"]]
"#,
    },
    ReferenceTable {
        number: 9,
        caption: "d_1 and d_2 rising with the level, d_3 solved, alpha = (0.35, 0.40, 0.45)",
        base: COARSE,
        deductible: r#"principle = "manual"
alphas = [0.35, 0.40, 0.45]
manual = [[0, 0.3, 1.3, "free"], [0, 0.5, 1.4, "free"], [0, 0.7, 1.5, "free"]]
"#,
    },
    ReferenceTable {
        number: 10,
        caption: "finer claim types, d_2 rising, d_3 solved, alpha = (0.10, 0.15, 0.20)",
        base: FINE,
        deductible: r#"principle = "manual"
alphas = [0.10, 0.15, 0.20]
manual = [[0, 0, 0.20, "free"], [0, 0, 0.25, "free"], [0, 0, 0.30, "free"]]
"#,
    },
    ReferenceTable {
        number: 11,
        caption: "finer claim types, d_1 and d_2 rising, d_3 solved, alpha = (0.20, 0.22, 0.24)",
        base: FINE,
        deductible: r#"principle = "manual"
alphas = [0.20, 0.22, 0.24]
manual = [[0, 0.05, 0.50, "free"], [0, 0.10, 0.55, "free"], [0, 0.10, 0.60, "free"]]
"#,
    },
    ReferenceTable {
        number: 12,
        caption: "finer claim types, d_1 and d_2 rising, d_3 solved, alpha = (0.35, 0.40, 0.45)",
        base: FINE,
        deductible: r#"principle = "manual"
alphas = [0.35, 0.40, 0.45]
manual = [[0, 0.10, 0.7, "free"], [0, 0.15, 0.8, "free"], [0, 0.20, 0.9, "free"]]
"#,
    },
];

pub fn reference_table(number: usize) -> Result<&'static ReferenceTable> {
    TABLES.iter().find(|t| t.number == number).ok_or_else(|| {
        Error::InvalidParameter(format!("no reference table {number}; tables are 1-12"))
    })
}

/// A solved reference tariff and its rendered level table.
#[derive(Debug, Clone)]
pub struct RenderedTable {
    pub tariff: Tariff,
    pub allocation: Allocation,
    pub table: Table,
}

/// Builds and allocates a reference tariff, optionally overriding the
/// quadrature order.
pub fn render(number: usize, quadrature_order: Option<usize>) -> Result<RenderedTable> {
    let mut config = reference_table(number)?.config()?;
    if let Some(order) = quadrature_order {
        config.numerics.quadrature_order = order;
        config.validate()?;
    }
    let tariff = Tariff::new(config)?;
    let allocation = tariff.allocate()?;
    let table = tariff_table(
        &tariff.profile,
        tariff.mean_claim(),
        Some(&allocation.schedule),
    );
    Ok(RenderedTable {
        tariff,
        allocation,
        table,
    })
}
