#pragma once

#include "twophase/error.hpp"
#include "twophase/text_io.hpp"
#include "twophase/repository.hpp"
#include "twophase/similarity.hpp"
#include "twophase/clustering.hpp"
#include "twophase/leep.hpp"
#include "twophase/recall.hpp"
#include "twophase/trend.hpp"
#include "twophase/trainer.hpp"
#include "twophase/selection.hpp"
#include "twophase/bundle.hpp"
#include "twophase/synthetic.hpp"
#include "twophase/pipeline.hpp"
#include "twophase/presets.hpp"
