#pragma once

#include <map>
#include <string>

namespace osmda::test {

// sha256sum of the files in data/prompts, frozen when the templates were
// checked against the reference wording.
inline const std::map<std::string, std::string> kFrozenPromptDigests = {
    {"caption_pseudolabel", "4e040fcc9adea54f94fb135c4635c483c7fafd13100df716802d73fc93e0a8ca"},
    {"classification", "e5522f8975597bfce2d5b78b8a6629539fafa9cf2cec217d7a04a5b90366ad09"},
    {"geval_caption", "554930ac602d97fba3ae66ee790215a6c58869f679cbac4465882adcb05d4b61"},
    {"geval_vqa", "f784786e892254151cc21eecc22eed056df4c87251c61df950bf084880433706"},
    {"million_aid", "13ca1c31823a4b750019a494b6cc60387c7412f00524c686e768828a0e37f631"},
    {"relabel", "ed9c369ca6742580184002648b84d77633a4f8d2daeb74c8ce2e6d2aafb2706c"},
    {"rsvqa_area", "f7470134baae9472ec2f05e0724b2ca9f931dde07cddae5e5d9c20fe1c7d41bc"},
    {"rsvqa_comparison", "06772cb0a0c27ab31d8b00f398dabcd9432a7cb65ac2b7533d37f9e7c056705e"},
    {"rsvqa_count", "a9263f4af5df8ce92eab9e8fabe36f07dea1a800f4aa34aeaaa82deb704dc9f5"},
    {"rsvqa_presence", "06772cb0a0c27ab31d8b00f398dabcd9432a7cb65ac2b7533d37f9e7c056705e"},
    {"rsvqa_rural_urban", "5be97407311c0f3947a9cc3867cff9e36ec6027a22ab552a067d70b15da414fe"},
    {"rsvqa_rural_urban_literal", "06772cb0a0c27ab31d8b00f398dabcd9432a7cb65ac2b7533d37f9e7c056705e"},
    {"short_caption", "f1997fb1d05054f2e4f69ddb02e72e7c1abcf8fc07d5e317bd05942cf62788d3"},
    {"vrsbench_caption", "801854c9000ffba334c9f3819a4d4052a9ddebbb478b3c5bbc31135bf9ec04ad"},
    {"vrsbench_vqa", "b05704c2eb08a581561978010692c822538091b12172d4da7429f9efda68879e"},
    {"xlrs_caption", "8b0611cf7cfc706eb97e31fcf3765c39aca662538413c92ab3c18a806f7ac31d"},
    {"xlrs_vqa", "a8460a53fff39e8f25368b0df42723a1f3bc6f8dd8ec33417332f8f0f1e92a88"},
};

}  // namespace osmda::test
