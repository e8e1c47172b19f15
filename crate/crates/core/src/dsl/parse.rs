use serde_json::{Map, Value};
use thiserror::Error;

use super::barcode::validate_barcode;
use super::model::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at {}: {message}", display_path(.path))]
    Schema { path: String, message: String },
    #[error("invariant violated at {}: {message}", display_path(.path))]
    Invariant { path: String, message: String },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "SyntaxError",
            ParseError::Schema { .. } => "SchemaError",
            ParseError::Invariant { .. } => "InvariantError",
        }
    }

    /// Slash-delimited locator of the failure; empty for syntax errors and the document root.
    pub fn path(&self) -> &str {
        match self {
            ParseError::Syntax { .. } => "",
            ParseError::Schema { path, .. } | ParseError::Invariant { path, .. } => path,
        }
    }
}

fn display_path(path: &str) -> &str {
    if path.is_empty() {
        "/"
    } else {
        path
    }
}

fn escape_token(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

type Result<T> = std::result::Result<T, ParseError>;

fn schema<T>(path: &str, message: impl Into<String>) -> Result<T> {
    Err(ParseError::Schema { path: path.to_owned(), message: message.into() })
}

fn invariant<T>(path: &str, message: impl Into<String>) -> Result<T> {
    Err(ParseError::Invariant { path: path.to_owned(), message: message.into() })
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// An object being decoded: tracks its path and which keys it allows.
struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, path: String, allowed: &[&str]) -> Result<Self> {
        let Value::Object(map) = value else {
            return schema(&path, format!("expected object, found {}", type_name(value)));
        };
        if let Some(unknown) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return schema(&format!("{path}/{}", escape_token(unknown)), format!("unknown field `{unknown}`"));
        }
        Ok(Obj { path, map })
    }

    fn child(&self, key: &str) -> String {
        format!("{}/{key}", self.path)
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn req(&self, key: &str) -> Result<&'a Value> {
        match self.map.get(key) {
            Some(v) => Ok(v),
            None => schema(&self.child(key), format!("missing field `{key}`")),
        }
    }

    fn string(&self, key: &str) -> Result<&'a str> {
        match self.req(key)? {
            Value::String(s) => Ok(s),
            other => schema(&self.child(key), format!("expected string, found {}", type_name(other))),
        }
    }

    fn boolean(&self, key: &str) -> Result<bool> {
        match self.req(key)? {
            Value::Bool(b) => Ok(*b),
            other => schema(&self.child(key), format!("expected boolean, found {}", type_name(other))),
        }
    }

    fn integer(&self, key: &str) -> Result<i64> {
        let v = self.req(key)?;
        match v.as_i64() {
            Some(n) => Ok(n),
            None => schema(&self.child(key), format!("expected integer, found {}", describe_number(v))),
        }
    }

    fn unsigned(&self, key: &str) -> Result<u32> {
        let n = self.integer(key)?;
        u32::try_from(n)
            .or_else(|_| schema(&self.child(key), format!("expected non-negative 32-bit integer, found {n}")))
    }

    fn array(&self, key: &str) -> Result<&'a Vec<Value>> {
        match self.req(key)? {
            Value::Array(a) => Ok(a),
            other => schema(&self.child(key), format!("expected array, found {}", type_name(other))),
        }
    }
}

fn describe_number(v: &Value) -> String {
    match v {
        Value::Number(n) => format!("number {n}"),
        other => type_name(other).to_owned(),
    }
}

fn media(value: &Value, path: String) -> Result<MediaRef> {
    let o = Obj::new(value, path, &["name", "kind"])?;
    let name = o.string("name")?.to_owned();
    let kind_text = o.string("kind")?;
    let Some(kind) = MediaKind::parse(kind_text) else {
        return schema(&o.child("kind"), format!("unknown media kind `{kind_text}`"));
    };
    Ok(MediaRef { name, kind })
}

fn opt_media(o: &Obj<'_>, key: &str) -> Result<Option<MediaRef>> {
    o.opt(key).map(|v| media(v, o.child(key))).transpose()
}

fn product(value: &Value, path: String) -> Result<FoodProduct> {
    let o = Obj::new(value, path, &["barcode", "name", "category", "image"])?;
    let barcode_text = o.string("barcode")?;
    let barcode = validate_barcode(barcode_text).or_else(|e| invariant(&o.child("barcode"), e.to_string()))?;
    Ok(FoodProduct {
        barcode,
        name: o.string("name")?.to_owned(),
        category: o.string("category")?.to_owned(),
        image: media(o.req("image")?, o.child("image"))?,
    })
}

fn transition(value: &Value, path: String) -> Result<TransitionSpec> {
    let Value::Object(map) = value else {
        return schema(&path, format!("expected object, found {}", type_name(value)));
    };
    let event = match map.get("event") {
        Some(Value::String(s)) => s.as_str(),
        Some(other) => return schema(&format!("{path}/event"), format!("expected string, found {}", type_name(other))),
        None => return schema(&format!("{path}/event"), "missing field `event`"),
    };
    let spec = match event {
        "DoorOpen" => {
            Obj::new(value, path, &["event"])?;
            TransitionSpec::DoorOpen
        }
        "DoorClosed" => {
            Obj::new(value, path, &["event"])?;
            TransitionSpec::DoorClosed
        }
        "UserConfirm" => {
            Obj::new(value, path, &["event"])?;
            TransitionSpec::UserConfirm
        }
        "WeightChange" => {
            let o = Obj::new(value, path, &["event", "minDeltaGrams"])?;
            let n = o.integer("minDeltaGrams")?;
            let grams =
                i32::try_from(n).or_else(|_| schema(&o.child("minDeltaGrams"), format!("{n} is out of range")))?;
            TransitionSpec::WeightChange { min_delta_grams: grams }
        }
        "TimerExpired" => {
            let o = Obj::new(value, path, &["event", "durationSeconds"])?;
            TransitionSpec::TimerExpired { duration_seconds: o.unsigned("durationSeconds")? }
        }
        "SmokeDetected" => {
            return invariant(
                &format!("{path}/event"),
                "SmokeDetected is a runtime safety event and cannot end an instruction",
            )
        }
        other => return schema(&format!("{path}/event"), format!("unknown transition event `{other}`")),
    };
    Ok(spec)
}

fn activations(value: &Value, path: String) -> Result<Activations> {
    let o = Obj::new(value, path, &["light", "carousel", "magnetron", "smokeAlarmAudible"])?;
    Ok(Activations {
        light: o.boolean("light")?,
        carousel: o.boolean("carousel")?,
        magnetron: o.boolean("magnetron")?,
        smoke_alarm_audible: o.boolean("smokeAlarmAudible")?,
    })
}

fn instruction(value: &Value, path: String) -> Result<Instruction> {
    let kind = match value {
        Value::Object(map) => match map.get("kind") {
            Some(Value::String(s)) => s.as_str(),
            Some(other) => {
                return schema(&format!("{path}/kind"), format!("expected string, found {}", type_name(other)))
            }
            None => return schema(&format!("{path}/kind"), "missing field `kind`"),
        },
        other => return schema(&path, format!("expected object, found {}", type_name(other))),
    };
    match kind {
        "user" => {
            let o = Obj::new(value, path, &["kind", "text", "image", "audio", "video", "until"])?;
            Ok(Instruction::User(UserInstruction {
                text: o.string("text")?.to_owned(),
                image: opt_media(&o, "image")?,
                audio: opt_media(&o, "audio")?,
                video: opt_media(&o, "video")?,
                until: transition(o.req("until")?, o.child("until"))?,
            }))
        }
        "device" => {
            let o = Obj::new(value, path, &["kind", "powerWatts", "durationSeconds", "activations"])?;
            Ok(Instruction::Device(DeviceInstruction {
                power_watts: o.unsigned("powerWatts")?,
                duration_seconds: o.unsigned("durationSeconds")?,
                activations: activations(o.req("activations")?, o.child("activations"))?,
            }))
        }
        other => schema(&format!("{path}/kind"), format!("unknown instruction kind `{other}`")),
    }
}

fn instruction_set(value: &Value, path: String) -> Result<CookingInstructionSet> {
    let o = Obj::new(value, path, &["id", "abilityLevel", "instructions"])?;
    let id = o.string("id")?.to_owned();
    let ability_level = o.unsigned("abilityLevel")?;
    let instructions = o
        .array("instructions")?
        .iter()
        .enumerate()
        .map(|(i, v)| instruction(v, format!("{}/{i}", o.child("instructions"))))
        .collect::<Result<_>>()?;
    Ok(CookingInstructionSet { id, ability_level, instructions })
}

/// Decodes an already-parsed JSON value, enforcing the strict schema and the type invariants.
pub fn resource_from_value(value: &Value) -> Result<ProductResource> {
    let o = Obj::new(value, String::new(), &["product", "instructionSets"])?;
    let product = product(o.req("product")?, o.child("product"))?;
    let instruction_sets = o
        .array("instructionSets")?
        .iter()
        .enumerate()
        .map(|(i, v)| instruction_set(v, format!("/instructionSets/{i}")))
        .collect::<Result<_>>()?;
    let resource = ProductResource { product, instruction_sets };
    if let Some(v) = invariant_violations(&resource).into_iter().next() {
        return invariant(&v.path, v.message);
    }
    Ok(resource)
}

/// Parses a UTF-8 resource document in strict mode.
pub fn parse_resource(bytes: &[u8]) -> Result<ProductResource> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    resource_from_value(&value)
}

/// Canonical document bytes: two-space indented JSON in declaration key order, newline-terminated.
pub fn serialize_resource(r: &ProductResource) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(r).expect("resource serialization is infallible");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "product": {
                "barcode": "0000000000000",
                "name": "Soup",
                "category": "soups",
                "image": {"name": "soup.png", "kind": "image"}
            },
            "instructionSets": [{
                "id": "basic",
                "abilityLevel": 1,
                "instructions": [
                    {"kind": "user", "text": "Press OK", "until": {"event": "UserConfirm"}}
                ]
            }]
        })
    }

    fn parse_value(v: &Value) -> Result<ProductResource> {
        parse_resource(&serde_json::to_vec(v).unwrap())
    }

    #[test]
    fn minimal_document_parses() {
        let r = parse_value(&minimal()).unwrap();
        assert_eq!(r.instruction_sets.len(), 1);
        assert_eq!(r.instruction_sets[0].instructions.len(), 1);
    }

    #[test]
    fn empty_instruction_sets_is_invariant_error() {
        let mut v = minimal();
        v["instructionSets"] = json!([]);
        let err = parse_value(&v).unwrap_err();
        assert_eq!(err.code(), "InvariantError");
        assert_eq!(err.path(), "/instructionSets");
    }

    #[test]
    fn audible_smoke_alarm_is_invariant_error() {
        let mut v = minimal();
        v["instructionSets"][0]["instructions"] = json!([
            {"kind": "device", "powerWatts": 600, "durationSeconds": 60,
             "activations": {"light": true, "carousel": true, "magnetron": true, "smokeAlarmAudible": true}}
        ]);
        let err = parse_value(&v).unwrap_err();
        assert_eq!(err.code(), "InvariantError");
        assert_eq!(err.path(), "/instructionSets/0/instructions/0/activations/smokeAlarmAudible");
    }

    #[test]
    fn unknown_field_rejected_with_path() {
        let mut v = minimal();
        v["instructionSets"][0]["instructions"][0]["colour"] = json!("red");
        let err = parse_value(&v).unwrap_err();
        assert_eq!(err.code(), "SchemaError");
        assert_eq!(err.path(), "/instructionSets/0/instructions/0/colour");

        let mut v = minimal();
        v["product"]["a/b"] = json!(1);
        assert_eq!(parse_value(&v).unwrap_err().path(), "/product/a~1b");
    }

    #[test]
    fn smoke_is_not_an_authorable_transition() {
        let mut v = minimal();
        v["instructionSets"][0]["instructions"][0]["until"] = json!({"event": "SmokeDetected"});
        let err = parse_value(&v).unwrap_err();
        assert_eq!(err.code(), "InvariantError");
        assert_eq!(err.path(), "/instructionSets/0/instructions/0/until/event");
    }

    #[test]
    fn ill_typed_and_missing_fields() {
        let mut v = minimal();
        v["instructionSets"][0]["abilityLevel"] = json!("one");
        let err = parse_value(&v).unwrap_err();
        assert_eq!((err.code(), err.path()), ("SchemaError", "/instructionSets/0/abilityLevel"));

        let mut v = minimal();
        v["product"].as_object_mut().unwrap().remove("category");
        let err = parse_value(&v).unwrap_err();
        assert_eq!((err.code(), err.path()), ("SchemaError", "/product/category"));

        let mut v = minimal();
        v["instructionSets"][0]["instructions"][0]["until"] = json!({"event": "UserConfirm", "durationSeconds": 3});
        let err = parse_value(&v).unwrap_err();
        assert_eq!(err.path(), "/instructionSets/0/instructions/0/until/durationSeconds");

        let mut v = minimal();
        v["instructionSets"][0]["instructions"][0]["until"] = json!({"event": "TimerExpired", "durationSeconds": 1.5});
        assert_eq!(parse_value(&v).unwrap_err().code(), "SchemaError");
    }

    #[test]
    fn bad_barcode_is_invariant_error() {
        let mut v = minimal();
        v["product"]["barcode"] = json!("1234567890123");
        let err = parse_value(&v).unwrap_err();
        assert_eq!((err.code(), err.path()), ("InvariantError", "/product/barcode"));
    }

    #[test]
    fn unsafe_media_name_rejected() {
        let mut v = minimal();
        v["product"]["image"]["name"] = json!("../secret");
        let err = parse_value(&v).unwrap_err();
        assert_eq!((err.code(), err.path()), ("InvariantError", "/product/image/name"));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_resource(b"{\n  \"product\": ").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }), "{err:?}");
        assert!(matches!(parse_resource(&[0xff, 0xfe]), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn utf8_names_round_trip_byte_exact() {
        let mut v = minimal();
        v["product"]["name"] = json!("Gemüsesuppe");
        let canonical = serialize_resource(&parse_value(&v).unwrap());
        assert!(String::from_utf8(canonical.clone()).unwrap().contains("Gemüsesuppe"));
        assert_eq!(serialize_resource(&parse_resource(&canonical).unwrap()), canonical);
    }
}
