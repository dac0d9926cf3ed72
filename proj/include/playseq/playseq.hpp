#pragma once

#include "playseq/cf.hpp"
#include "playseq/corpus.hpp"
#include "playseq/errors.hpp"
#include "playseq/eval.hpp"
#include "playseq/hmm.hpp"
#include "playseq/model_io.hpp"
#include "playseq/predict.hpp"
