//! Marine knowledge base loaded from an XML file.
//!
//! The file format is a flat object/attribute listing:
//!
//! ```xml
//! <knowledge>
//!   <object name="coral_reef">
//!     <attribute>usually grow in areas with ample sunlight</attribute>
//!   </object>
//! </knowledge>
//! ```
//!
//! Each `<attribute>` becomes one fact keyed by its object's class name.

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub facts: Vec<Fact>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub class: String,
    pub attribute: String,
}

impl KnowledgeBase {
    pub fn facts_for<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        self.facts.iter().filter(move |f| f.class == class)
    }
}

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("<object> element at position {0} is missing its name attribute")]
    MissingNameAttribute(u64),
}

/// Parses the knowledge XML into a [`KnowledgeBase`].
pub fn parse_knowledge_xml(text: &str) -> Result<KnowledgeBase, KnowledgeError> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut kb = KnowledgeBase::default();
    let mut current_object: Option<String> = None;
    let mut in_attribute = false;
    let mut depth = 0usize;
    loop {
        match reader.read_event() {
            Err(e) => return Err(KnowledgeError::MalformedXml(e.to_string())),
            Ok(Event::Eof) => {
                if depth != 0 {
                    return Err(KnowledgeError::MalformedXml("unclosed element".into()));
                }
                break;
            }
            Ok(Event::Start(tag)) => {
                depth += 1;
                match tag.name().as_ref() {
                    b"knowledge" => {}
                    b"object" => {
                    let name = tag
                        .attributes()
                        .filter_map(|a| a.ok())
                        .find(|a| a.key.as_ref() == b"name")
                        .map(|a| String::from_utf8_lossy(&a.value).into_owned());
                    match name {
                        Some(n) => current_object = Some(n),
                        None => {
                            return Err(KnowledgeError::MissingNameAttribute(
                                reader.buffer_position(),
                            ))
                        }
                    }
                }
                    b"attribute" => in_attribute = true,
                    other => {
                        return Err(KnowledgeError::MalformedXml(format!(
                            "unexpected element <{}>",
                            String::from_utf8_lossy(other)
                        )))
                    }
                }
            }
            Ok(Event::End(tag)) => {
                depth = depth.saturating_sub(1);
                match tag.name().as_ref() {
                    b"object" => current_object = None,
                    b"attribute" => in_attribute = false,
                    _ => {}
                }
            }
            Ok(Event::Text(t)) => {
                if in_attribute {
                    let class = current_object.clone().ok_or_else(|| {
                        KnowledgeError::MalformedXml(
                            "<attribute> outside of an <object>".into(),
                        )
                    })?;
                    let attribute = t
                        .decode()
                        .map_err(|e| KnowledgeError::MalformedXml(e.to_string()))?
                        .into_owned();
                    if !attribute.is_empty() {
                        kb.facts.push(Fact { class, attribute });
                    }
                }
            }
            Ok(Event::Empty(tag)) => {
                if tag.name().as_ref() == b"object" {
                    // Self-closing object still needs its name checked.
                    let has_name = tag
                        .attributes()
                        .filter_map(|a| a.ok())
                        .any(|a| a.key.as_ref() == b"name");
                    if !has_name {
                        return Err(KnowledgeError::MissingNameAttribute(
                            reader.buffer_position(),
                        ));
                    }
                }
            }
            Ok(_) => {}
        }
    }
    Ok(kb)
}

/// The marine knowledge file shipped with the crate.
pub const MARINE_KNOWLEDGE_TEXT: &str = include_str!("../assets/knowledge.xml");

pub fn marine_knowledge() -> KnowledgeBase {
    parse_knowledge_xml(MARINE_KNOWLEDGE_TEXT).expect("bundled knowledge file parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coral_reef_sunlight_fact_parses() {
        let kb = parse_knowledge_xml(
            r#"<knowledge>
  <object name="coral_reef">
    <attribute>usually grow in areas with ample sunlight</attribute>
  </object>
</knowledge>"#,
        )
        .unwrap();
        assert_eq!(kb.facts.len(), 1);
        assert_eq!(kb.facts[0].class, "coral_reef");
        assert!(kb.facts[0].attribute.contains("ample sunlight"));
    }

    #[test]
    fn empty_knowledge_is_empty() {
        let kb = parse_knowledge_xml("<knowledge/>").unwrap();
        assert!(kb.facts.is_empty());
    }

    #[test]
    fn object_without_name_is_rejected() {
        let err = parse_knowledge_xml(
            "<knowledge><object><attribute>x</attribute></object></knowledge>",
        )
        .unwrap_err();
        assert!(matches!(err, KnowledgeError::MissingNameAttribute(_)));
    }

    #[test]
    fn malformed_xml_is_rejected() {
        assert!(matches!(
            parse_knowledge_xml("<knowledge><object name='x'>"),
            Err(KnowledgeError::MalformedXml(_))
        ));
    }

    #[test]
    fn bundled_file_parses() {
        let kb = marine_knowledge();
        assert!(kb.facts_for("coral_reef").any(|f| f.attribute.contains("sunlight")));
    }
}
