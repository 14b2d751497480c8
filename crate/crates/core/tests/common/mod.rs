//! Fixtures shared by the integration tests.

#![allow(dead_code)]

use bpeq::network::{Network, NetworkDocument};

/// Four approaches with through and right turns only: no left turns anywhere.
pub const NO_LEFTS: &str = r#"
[[links]]
id = "n_in"
length = 300.0
from = "n_end"
to = "c"
lanes = 2

[[links]]
id = "e_in"
length = 300.0
from = "e_end"
to = "c"
lanes = 2

[[links]]
id = "s_in"
length = 300.0
from = "s_end"
to = "c"
lanes = 2

[[links]]
id = "w_in"
length = 300.0
from = "w_end"
to = "c"
lanes = 2

[[links]]
id = "n_out"
length = 300.0
from = "c"
to = "n_end"
lanes = 2

[[links]]
id = "e_out"
length = 300.0
from = "c"
to = "e_end"
lanes = 2

[[links]]
id = "s_out"
length = 300.0
from = "c"
to = "s_end"
lanes = 2

[[links]]
id = "w_out"
length = 300.0
from = "c"
to = "w_end"
lanes = 2

[[movements]]
id = "n_through"
from = "n_in"
to = "s_out"
turn = "through"

[[movements]]
id = "n_right"
from = "n_in"
to = "w_out"
turn = "right"

[[movements]]
id = "e_through"
from = "e_in"
to = "w_out"
turn = "through"

[[movements]]
id = "e_right"
from = "e_in"
to = "n_out"
turn = "right"

[[movements]]
id = "s_through"
from = "s_in"
to = "n_out"
turn = "through"

[[movements]]
id = "s_right"
from = "s_in"
to = "e_out"
turn = "right"

[[movements]]
id = "w_through"
from = "w_in"
to = "e_out"
turn = "through"

[[movements]]
id = "w_right"
from = "w_in"
to = "s_out"
turn = "right"

[[intersections]]
id = "c"
approaches = ["n_in", "e_in", "s_in", "w_in"]
"#;

pub fn no_lefts() -> Network {
    Network::build(&NetworkDocument::from_toml(NO_LEFTS).unwrap()).unwrap()
}
