#pragma once

#include "hetfeed/corpus.hpp"
#include "hetfeed/embed.hpp"
#include "hetfeed/embedding.hpp"
#include "hetfeed/emit.hpp"
#include "hetfeed/error.hpp"
#include "hetfeed/evaluate.hpp"
#include "hetfeed/io.hpp"
#include "hetfeed/kmeans.hpp"
#include "hetfeed/pipeline.hpp"
#include "hetfeed/probe.hpp"
#include "hetfeed/random.hpp"
#include "hetfeed/render.hpp"
#include "hetfeed/select.hpp"
#include "hetfeed/types.hpp"
#include "hetfeed/unify.hpp"
