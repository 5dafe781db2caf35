// Copyright 2026 The ctr Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "ctr/common/error.hpp"
#include "ctr/common/parallel.hpp"
#include "ctr/common/types.hpp"
#include "ctr/fcp/fcp.hpp"
#include "ctr/loss/loss.hpp"
#include "ctr/metrics/metrics.hpp"
#include "ctr/pipeline/blockwise.hpp"
#include "ctr/pipeline/config.hpp"
#include "ctr/pipeline/manifest.hpp"
#include "ctr/scene/activity.hpp"
#include "ctr/scene/room.hpp"
#include "ctr/scene/scene.hpp"
#include "ctr/scene/sources.hpp"
#include "ctr/signal/stft.hpp"
#include "ctr/signal/subband.hpp"
#include "ctr/signal/wav_io.hpp"
#include "ctr/signal/waveform.hpp"
#include "ctr/solver/solver.hpp"
