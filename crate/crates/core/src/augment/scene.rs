use super::AugmentError;
use crate::backends::{GenerationRequest, GeneratorBackend};
use crate::corpus::{augmented_id, CaptionRecord, Provenance, QARecord, SceneId};

/// Prompt sent with every scene generation request.
pub const SCENE_PROMPT: &str = "You are shown an indoor 3D scene ({scene_id}) described by the \
object annotations below.\n{context}\nWrite {k} question-answer pairs about the objects in this \
scene: their colors, counts, types, spatial relations and locations. Answers are short phrases.";

/// Output of one scene generation call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneQa {
    pub records: Vec<QARecord>,
    /// Malformed candidates discarded by the client or here.
    pub dropped: usize,
}

pub fn render_prompt(scene_id: &SceneId, context: &str, k: usize) -> String {
    SCENE_PROMPT
        .replace("{scene_id}", scene_id.as_str())
        .replace("{context}", context)
        .replace("{k}", &k.to_string())
}

/// Scene summary passed to the generator: one description per line, in
/// object order.
pub fn scene_context(captions: &[&CaptionRecord]) -> String {
    let mut sorted: Vec<&&CaptionRecord> = captions.iter().collect();
    sorted.sort_by(|a, b| (a.object_id, &a.id).cmp(&(b.object_id, &b.id)));
    sorted
        .iter()
        .map(|c| c.description.trim())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Requests up to `k` QA pairs for one scene.
pub fn scene_to_qa(
    scene_id: &SceneId,
    context: &str,
    generator: &dyn GeneratorBackend,
    k: usize,
) -> Result<SceneQa, AugmentError> {
    if k == 0 {
        return Err(AugmentError::InvalidParameter("k must be at least 1".into()));
    }
    let request = GenerationRequest {
        scene_id: scene_id.to_string(),
        context: context.to_string(),
        template: render_prompt(scene_id, context, k),
        k,
    };
    let generated = generator.generate(&request)?;
    let mut out = SceneQa {
        records: Vec::new(),
        dropped: generated.dropped,
    };
    for c in generated.candidates {
        if !c.is_well_formed() {
            out.dropped += 1;
            continue;
        }
        if out.records.len() == k {
            break;
        }
        let idx = out.records.len();
        out.records.push(QARecord {
            id: augmented_id(Provenance::SceneGen, scene_id.as_str(), idx),
            scene_id: scene_id.clone(),
            question: crate::text::nfc(c.q.trim()),
            answers: vec![crate::text::nfc(c.a.trim())],
            object_ids: Vec::new(),
            provenance: Provenance::SceneGen,
            scores: None,
        });
    }
    Ok(out)
}
