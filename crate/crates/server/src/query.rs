//! Query-string parsing for the read endpoints.

use std::str::FromStr;

use thiserror::Error;
use threadscope_core::analytics::{
    AnalyticsConfig, ClassSet, CommentClass, MetricThresholds, SortKey, TimeWindow, DEFAULT_BINS,
};
use threadscope_core::model::EpochSeconds;

pub const DEFAULT_PAGE_SIZE: usize = 25;
pub const MAX_PAGE_SIZE: usize = 500;
pub const MAX_BINS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("parameter {name}: {message}")]
    Invalid { name: String, message: String },
    #[error("unknown parameter {0:?}")]
    Unknown(String),
}

fn invalid(name: &str, message: impl ToString) -> QueryError {
    QueryError::Invalid {
        name: name.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryParams {
    pub sort: SortKey,
    pub page: usize,
    pub page_size: usize,
    pub thresholds: MetricThresholds,
    /// `None` means the snapshot's fetch time.
    pub anchor: Option<EpochSeconds>,
    /// Already clamped into the legal span range.
    pub span: i64,
    pub bins: usize,
    pub show_inactive: bool,
    pub filter: Option<ClassSet>,
}

impl Default for QueryParams {
    fn default() -> Self {
        let defaults = AnalyticsConfig::default();
        Self {
            sort: SortKey::default(),
            page: 0,
            page_size: DEFAULT_PAGE_SIZE,
            thresholds: defaults.thresholds,
            anchor: None,
            span: defaults.span(),
            bins: DEFAULT_BINS,
            show_inactive: false,
            filter: None,
        }
    }
}

fn number<T: FromStr>(name: &str, value: &str) -> Result<T, QueryError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| invalid(name, e))
}

fn boolean(name: &str, value: &str) -> Result<bool, QueryError> {
    match value.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(invalid(name, format!("{other:?} is not a boolean"))),
    }
}

impl QueryParams {
    /// Parses a raw query string. `filter` may repeat and each value may also
    /// be a comma-separated list; an empty `filter=` selects no classes.
    pub fn parse(query: &str) -> Result<Self, QueryError> {
        let mut params = Self::default();
        let mut toxicity = params.thresholds.toxicity_threshold;
        let mut score = params.thresholds.score_threshold;
        for (name, value) in url::form_urlencoded::parse(query.as_bytes()) {
            let value = value.as_ref();
            match name.as_ref() {
                "sort" => params.sort = value.parse().map_err(|e| invalid("sort", e))?,
                "page" => params.page = number("page", value)?,
                "page_size" => {
                    let n: usize = number("page_size", value)?;
                    if !(1..=MAX_PAGE_SIZE).contains(&n) {
                        return Err(invalid("page_size", format!("must be within 1..={MAX_PAGE_SIZE}")));
                    }
                    params.page_size = n;
                }
                "toxicity_threshold" => toxicity = number("toxicity_threshold", value)?,
                "score_threshold" => score = number("score_threshold", value)?,
                "anchor" => params.anchor = Some(number("anchor", value)?),
                "span_seconds" => {
                    let span: i64 = number("span_seconds", value)?;
                    params.span = TimeWindow::clamped(0, span).span;
                }
                "bins" => {
                    let n: usize = number("bins", value)?;
                    if !(1..=MAX_BINS).contains(&n) {
                        return Err(invalid("bins", format!("must be within 1..={MAX_BINS}")));
                    }
                    params.bins = n;
                }
                "show_inactive" => params.show_inactive = boolean("show_inactive", value)?,
                "filter" => {
                    let set = params.filter.get_or_insert_with(ClassSet::default);
                    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        set.insert(CommentClass::from_str(part).map_err(|e| invalid("filter", e))?);
                    }
                }
                other => return Err(QueryError::Unknown(other.to_string())),
            }
        }
        params.thresholds = MetricThresholds::new(toxicity, score).map_err(|e| invalid("toxicity_threshold", e))?;
        Ok(params)
    }

    pub fn window(&self, default_anchor: EpochSeconds) -> TimeWindow {
        TimeWindow::clamped(self.anchor.unwrap_or(default_anchor), self.span)
    }
}
