#pragma once

#include <array>
#include <string_view>

namespace overlay::data {

// Reference taxonomy of fine-grained question attributes, grouped by the
// dimension and tier they belong to (also shipped as
// data/attributes_reference.txt). Ingest warns on attributes outside this
// list but does not reject them, so the taxonomy stays extensible.
inline constexpr std::array<std::string_view, 88> kAttributeReference = {
    // action / perceptual
    "specific verb discrimination",
    "action manner",
    "action direction",
    "body part involvement",
    "action target",
    "sports/exercise recognition",
    "scene content description",
    "camera movement",
    // action / semantic
    "action outcome",
    "behavioral intent",
    "behavioral constraint",
    "action purpose",
    "scene purpose understanding",
    "cognitive timing",
    "sequential action relation",
    // action / reasoning
    "interpersonal interaction",
    "character emotional response",
    "emotional atmosphere",
    "atmosphere change",
    "character attitude and emotion",
    "cultural norm change",
    "historical event description",
    "historical event understanding",
    // temporal / perceptual
    "event order",
    "step order",
    "appearance order",
    // temporal / semantic
    "time span judgment",
    "frequency count",
    "duration estimation",
    "regular change timing",
    // temporal / reasoning
    "before-after change",
    "simultaneous occurrence",
    "tone change",
    // spatial / perceptual
    "relative position",
    "absolute position",
    "orientation",
    "spatial distance",
    "containment relation",
    // spatial / semantic
    "motion trajectory",
    // spatial / reasoning
    "scene composition",
    "spatial hierarchy",
    "scene description understanding",
    // object / perceptual
    "object recognition",
    "object attribute",
    "object quantity",
    "object ownership",
    "text content",
    "object function",
    "object utility",
    "object state",
    "action recognition",
    // object / semantic
    "scene/background",
    "character recognition",
    "socio-cultural phenomenon",
    "geographic location recognition",
    "theme/topic",
    "character relationship understanding",
    "character relationship motivation",
    // object / reasoning
    "behavioral cause understanding",
    "event cause",
    "historical event sequence",
    "event consequence inference",
    "historical event causality",
    "behavioral reasoning",
    "causal reasoning",
    "event cause analysis",
    "event outcome understanding",
    "character emotion",
    "character mental state",
    "character action and emotion",
    "emotion recognition",
    "emotional response",
    "character intention",
    "behavioral intention understanding",
    "concept understanding",
    "activity meaning understanding",
    "inferential judgment",
    "atmosphere perception",
    "emotional cause understanding",
    "dialogue content understanding",
    "character behavior cause",
    "scientific principle explanation",
    "object behavior motivation",
    "event cause understanding",
    "behavioral motivation",
    "intention understanding",
    "language usage norm",
    "shot change",
};

// Case-insensitive membership test against kAttributeReference.
bool is_reference_attribute(std::string_view attribute);

}  // namespace overlay::data
