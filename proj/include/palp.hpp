// Copyright 2026 The PALP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PALP_PALP_HPP_
#define PALP_PALP_HPP_

#include "palp/app.hpp"
#include "palp/config.hpp"
#include "palp/corpus.hpp"
#include "palp/demo_select.hpp"
#include "palp/embedding.hpp"
#include "palp/error.hpp"
#include "palp/gateway.hpp"
#include "palp/gaussian.hpp"
#include "palp/harness.hpp"
#include "palp/icl.hpp"
#include "palp/probers/model.hpp"
#include "palp/providers.hpp"
#include "palp/templating.hpp"

#endif  // PALP_PALP_HPP_
