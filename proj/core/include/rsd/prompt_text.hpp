// Copyright 2026 The RSD Authors.
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

#pragma once

// Fixed prompt texts and reference records for the risk annotation
// toolchain. The strings are kept byte-for-byte (including their original
// spelling) because recorded VLM responses were produced against them.

namespace rsd::prompt_text {

inline constexpr const char* kTaskDescription =
    R"rsd(You are the brain of an autonomous vehicle. These image sequences are returned by your forward-facing camera. Analyze the risk critical objects in the diagram, such as occlusion that vehicles comes to lanes of ego vehicle suddenly or motorcycles obscured by cars or pedestrains obscured by cars, and you must detect all these critical objects in the image with its bounding box. And you can use the information from another grounding model, which describe the location of different objects. Notice that the socre of json is the confidence score of bbox.)rsd";

inline constexpr const char* kOutputInstruction =
    R"rsd(You must output the object in a risk order and don't omit the isntance with bbox in the image, and don't output any text other than the json data. Please note that if a median or fence is observed between a neighboring vehicle and your own vehicle, this should not be considered a risk. Please note that if you think the risk level of an object is high, its risk score should not be lower than 0.7; if you think the risk of an object is low, its risk score should not be higher than 0.3; and for the object in a medium risk level, its score should be between 0.3-0.7; Be careful not to pay too much risk attention to oncoming vehicles. You must output information in the json format followed and give rank based on the risk level, )rsd";

// Reference output record shipped inside the output-format prompt.
inline constexpr const char* kOutputSample = R"rsd({      
    '0':{ 
    'category_id':1,
    'bbox':[126, 87, 398, 444],
    'risk_score':0.93,
    'risk_level': 'high'
    'category_name':'bus', 
    'reason':'the bus is very close to the ego vehicle' 
    }, 
    '1': { 
    'category_id': 3,  
    'bbox': [299,325,412,393], 
    'risk_score': 0.21, 
    'risk_level': 'low', 
    'category_name': 'car', 
    'reason': 
    'the car is parked along the road'} 
    '2': { 
    'category_id': 3,  
    'bbox': [199,325,432,383], 
    'risk_score': 0.41, 
    'risk_level': 'mediam', 
    'category_name': 'car', 
    'reason': 'The vehicle is in the opposite lane'},
})rsd";

// Reference visual-grounding record in the state-info format.
inline constexpr const char* kStateInfoSample = R"rsd({'label':'car',
'points':
[[356.63262939453125,1010.9845581054688],
[1474.0504150390625,1619.9420166015625]],
'group_id': null,
'shape_type': 'rectangle',
'description': 'score: 0.735',
'flags': {}})rsd";

}  // namespace rsd::prompt_text
