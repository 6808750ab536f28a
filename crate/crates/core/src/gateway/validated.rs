use super::{ChatBackend, ChatMessage, ChatRequest, GatewayError};
use crate::model::{parse_with_schema, AgentResponse, ModelError, ResponseSchema};

pub const DEFAULT_MAX_REPAIRS: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedCompletion {
    pub response: AgentResponse,
    /// The completion text that parsed.
    pub raw: String,
    /// Backend calls made, including the successful one.
    pub calls: u32,
}

pub fn repair_message(error: &ModelError, schema: ResponseSchema) -> String {
    format!(
        "Your previous reply could not be used: {error}\n\
         Reply again with a single JSON object and nothing else. Required fields:\n{}",
        schema.field_summary()
    )
}

/// Completes `request` and parses it against `schema`. Invalid replies are
/// answered with a repair prompt, at most `max_repairs` times.
pub fn complete_validated(
    backend: &dyn ChatBackend,
    request: &ChatRequest,
    schema: ResponseSchema,
    max_repairs: u32,
) -> Result<ValidatedCompletion, GatewayError> {
    let mut request = request.clone();
    let mut calls = 0;
    loop {
        let raw = backend.complete(&request)?;
        calls += 1;
        match parse_with_schema(&raw, schema) {
            Ok(response) => return Ok(ValidatedCompletion { response, raw, calls }),
            Err(error) if calls > max_repairs => return Err(GatewayError::ValidationExhausted { last_error: error }),
            Err(error) => {
                tracing::debug!(%error, calls, "repairing malformed completion");
                request.messages.push(ChatMessage::assistant(raw));
                request.messages.push(ChatMessage::user(repair_message(&error, schema)));
            }
        }
    }
}
