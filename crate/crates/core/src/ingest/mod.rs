//! Getting threads into the system: provider listings, live collection,
//! and synthetic corpora.

pub mod fetch;
pub mod listing;
pub mod synth;

pub use fetch::{Credentials, FetchClient, FetchError, ProviderConfig};
pub use listing::{build_tree, parse_listing, parse_listing_with, ListingError, OrphanPolicy, RawComment, RawListing};
pub use synth::{generate_synthetic, CountRange, SpikeConfig, SynthError, SyntheticConfig, TimeRange};
