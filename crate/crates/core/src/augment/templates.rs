//! Prompt templates for query and document augmentation.
//!
//! Slots are written `{tweet}`, `{title}`, `{page_content}` and
//! `{format_instructions}`; everything else is literal.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Rewrite,
    Expand,
    Hyde,
    DocSummary,
    DocTweet,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::Rewrite,
        TemplateName::Expand,
        TemplateName::Hyde,
        TemplateName::DocSummary,
        TemplateName::DocTweet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Rewrite => "rewrite",
            TemplateName::Expand => "expand",
            TemplateName::Hyde => "hyde",
            TemplateName::DocSummary => "doc_summary",
            TemplateName::DocTweet => "doc_tweet",
        }
    }

    pub fn body(self) -> &'static str {
        match self {
            TemplateName::Rewrite => REWRITE,
            TemplateName::Expand => EXPAND,
            TemplateName::Hyde => HYDE,
            TemplateName::DocSummary => DOC_SUMMARY,
            TemplateName::DocTweet => DOC_TWEET,
        }
    }

    /// Text substituted for `{format_instructions}`.
    pub fn format_instructions(self) -> &'static str {
        match self {
            TemplateName::Hyde => {
                "Return only a JSON object with exactly two string fields: \"title\" and \"abstract\"."
            }
            TemplateName::DocSummary => "Return only the summary text, without any preamble.",
            TemplateName::DocTweet => "Return only the text of the tweet, without any preamble.",
            TemplateName::Rewrite | TemplateName::Expand => "",
        }
    }

    /// Fill a post-based template.
    pub fn fill_tweet(self, tweet: &str) -> String {
        self.body()
            .replace("{format_instructions}", self.format_instructions())
            .replace("{tweet}", tweet)
    }

    /// Fill a document-based template.
    pub fn fill_document(self, title: &str, abstract_text: &str) -> String {
        self.body()
            .replace("{format_instructions}", self.format_instructions())
            .replace("{title}", title)
            .replace("{page_content}", abstract_text)
    }
}

impl std::fmt::Display for TemplateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rewrites a post into academic language.
pub const REWRITE: &str = r##"Translate informal text into precise academic language, preserving
original meaning.

Transformation Guidelines:
- Correct the original tweet's spelling and grammar errors while maintaining its style
- Convert colloquial language to precise academic terminology
- Convert hastags into proper words
- Do not add anything new. Only correct the mistakes in the original tweet.

Output format:
Return a single string

Example:
Original Tweet: "Just saw amazin new study - mice w/ #Alzheimers showed
45
#neurodegeneration research imo"

Output:
Just saw amazing new study - mice with Alzheimers showed 45
in memory after new drug treatment!! Game changer for
neurodegeneration research in my opinion

Transform the following tweet:
{tweet}"##;

/// Corrected post and academic version, separated by ` || `.
pub const EXPAND: &str = r##"Translate informal text into precise academic language, according to the
transformation guidelines.

Transformation Guidelines:

First, correct the original tweet's spelling and grammar errors while
maintaining its style. Then transform the tweet into academic language
using these rules:

-Convert colloquial language to precise academic terminology
-Maintain semantic accuracy of the original message
-Use passive voice and objective scientific tone
-Eliminate informal expressions and subjective qualifiers
-Transform hashtags into their full, proper form (e.g., "#COVID19" -> "COVID-19 pandemic")
-Expand abbreviations and acronyms to their full forms
-Include key research terms that would appear in academic database searches
-Preserve all factual claims, statistics, and findings mentioned
-Structure as a concise academic abstract (2-3 sentences)

Output format:
Return a single continuous string with both versions separated by " || " as follows:
[Corrected Tweet] || [Academic Version]

Example:
Original Tweet: "Just saw amazin new study - mice w/ #Alzheimers showed
45
#neurodegeneration research imo"

Output:
"Just saw amazing new study - mice with #Alzheimers showed 45%
improvement in memory after new drug treatment!! Game changer for
#neurodegeneration research in my opinion || A recent pharmacological
intervention demonstrated significant efficacy in an Alzheimer's
disease mouse model, with subjects exhibiting a 45
memory function following administration of the novel compound.
These findings represent a potentially significant advancement in
neurodegenerative disease research, particularly regarding
therapeutic approaches for memory deficit amelioration in Alzheimer's
pathology."

Transform the following tweet:
{tweet}"##;

/// Hypothetical title and abstract for a post.
pub const HYDE: &str = r##"You are an expert in scientific research. Based on the following tweet,
generate a hypothetical scientific paper that includes only a title and
an abstract. The abstract should succinctly summarize the research
objective, methodology,  key findings, and conclusions.

Tweet: {tweet}

{format_instructions}"##;

/// Keyword-rich summary of a document.
pub const DOC_SUMMARY: &str = r##"Summarize the following document:

Title: {title}
Abstract: {page_content}

Make sure to include keywords that are likely to be found later by a
search.

{format_instructions}"##;

/// Synthetic social-media post about a document.
pub const DOC_TWEET: &str = r##"Generate a hypothetical Twitter tweet about the following document:

Title: {title}
Abstract: {page_content}

Make sure it looks like a typical tweet from an average person and is
not too long.

{format_instructions}"##;
