/*
Copyright 2026 The ambintf Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef AMBINTF_AMBINTF_H_
#define AMBINTF_AMBINTF_H_

#include "ambintf/bsseval.h"
#include "ambintf/common.h"
#include "ambintf/linalg.h"
#include "ambintf/model.h"
#include "ambintf/pipeline.h"
#include "ambintf/priors.h"
#include "ambintf/reconstruct.h"
#include "ambintf/roomsim.h"
#include "ambintf/signal.h"
#include "ambintf/solver.h"
#include "ambintf/sph.h"
#include "ambintf/synth.h"
#include "ambintf/wav.h"

#endif  // AMBINTF_AMBINTF_H_
