/* Copyright 2026 The riskprune Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* Compile-only check that the public header is valid C. */

#include "riskprune.h"

const char* (*rp_version_ptr)(void) = rp_version;
rp_status (*rp_calibrate_ptr)(const rp_dataset*, const char*, char**,
                              char**) = rp_calibrate;
rp_status rp_ok_value = RP_OK;
