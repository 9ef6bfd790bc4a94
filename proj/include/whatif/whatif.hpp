#pragma once

// Scene-graph world model + what-if question answering:
//   - symbolic scenes, action execution, question programs (exact oracles)
//   - seeded synthetic dataset generation
//   - learned action representations (scene-pair encoder/decoder + text encoder)
//   - evaluation harness

#include "whatif/actions.hpp"
#include "whatif/datagen.hpp"
#include "whatif/evaluate.hpp"
#include "whatif/nn.hpp"
#include "whatif/pipeline.hpp"
#include "whatif/questions.hpp"
#include "whatif/rng.hpp"
#include "whatif/scene.hpp"
#include "whatif/scene_json.hpp"
#include "whatif/tensor_codec.hpp"
#include "whatif/text.hpp"
#include "whatif/vocab.hpp"
