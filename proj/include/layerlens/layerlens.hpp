#pragma once

// Umbrella header: the whole toolkit.

#include "layerlens/ablation.hpp"
#include "layerlens/answer_matching.hpp"
#include "layerlens/checkpoint_io.hpp"
#include "layerlens/dataset.hpp"
#include "layerlens/errors.hpp"
#include "layerlens/evaluate.hpp"
#include "layerlens/forward.hpp"
#include "layerlens/kmeans.hpp"
#include "layerlens/model.hpp"
#include "layerlens/nmi.hpp"
#include "layerlens/nmi_curve.hpp"
#include "layerlens/parallel.hpp"
#include "layerlens/prompt_templates.hpp"
#include "layerlens/report_io.hpp"
#include "layerlens/rng.hpp"
#include "layerlens/sampler.hpp"
#include "layerlens/tensor.hpp"
#include "layerlens/tokenizer.hpp"
#include "layerlens/version.hpp"
