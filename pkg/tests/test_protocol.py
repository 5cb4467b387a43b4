import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lingobank import protocol as proto
from lingobank.errors import MalformedFrame, SchemaViolation, UnknownType


def test_decode_auth_frame():
    env = proto.decode('{"v":1,"type":"AUTH","seq":1,"payload":{"token":"t"}}')
    assert env == proto.Envelope(type="AUTH", seq=1, payload={"token": "t"})


def test_unknown_type():
    with pytest.raises(UnknownType):
        proto.decode('{"v":1,"type":"NOPE","seq":1,"payload":{}}')


def test_truncated_frame():
    with pytest.raises(MalformedFrame):
        proto.decode('{"v":1,"type":"AUTH","seq":1,"payl')


@pytest.mark.parametrize("frame", [
    "[]",
    '"AUTH"',
    '{"type":"AUTH","seq":1,"payload":{}}',            # no version
    '{"v":1,"seq":1,"payload":{}}',                    # no type
    '{"v":1,"type":"AUTH","payload":{}}',              # no seq
    '{"v":1,"type":"AUTH","seq":1}',                   # no payload
    '{"v":1,"type":"AUTH","seq":-1,"payload":{}}',     # negative seq
    '{"v":1,"type":"AUTH","seq":1,"payload":[]}',      # payload not object
    '{"v":"1","type":"AUTH","seq":1,"payload":{}}',    # stringly version
])
def test_malformed_envelopes(frame):
    with pytest.raises(MalformedFrame):
        proto.decode(frame)


def test_unsupported_version():
    with pytest.raises(SchemaViolation):
        proto.decode('{"v":2,"type":"AUTH","seq":1,"payload":{"token":"t"}}')


@pytest.mark.parametrize("frame", [
    '{"v":1,"type":"AUTH","seq":1,"payload":{}}',                       # missing token
    '{"v":1,"type":"AUTH","seq":1,"payload":{"token":7}}',              # mistyped
    '{"v":1,"type":"AUTH","seq":1,"payload":{"token":"t","x":1}}',      # unexpected
    '{"v":1,"type":"PRESENCE","seq":1,"payload":{"status":"IN_SESSION","roles":[]}}',
    '{"v":1,"type":"RATE","seq":1,"payload":{"session_id":"s","stars":"5"}}',
    '{"v":1,"type":"CARD_ADVANCE","seq":1,"payload":{"session_id":"s"}}',
])
def test_schema_violations(frame):
    with pytest.raises(SchemaViolation):
        proto.decode(frame)


def test_rtc_payload_is_opaque_beyond_session_id():
    frame = ('{"v":1,"type":"RTC_OFFER","seq":3,"payload":'
             '{"session_id":"s-1","sdp":"v=0...","anything":["goes",1,null]}}')
    env = proto.decode(frame)
    assert env.payload["anything"] == ["goes", 1, None]
    with pytest.raises(SchemaViolation):
        proto.decode('{"v":1,"type":"RTC_OFFER","seq":3,"payload":{"sdp":"x"}}')


json_scalars = st.one_of(
    st.none(), st.booleans(), st.integers(-2**31, 2**31),
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.text(max_size=20))
json_values = st.recursive(
    json_scalars,
    lambda children: st.one_of(
        st.lists(children, max_size=4),
        st.dictionaries(st.text(max_size=8), children, max_size=4)),
    max_leaves=8)


def _payload_strategy(msg_type: str):
    schema = proto.SCHEMAS[msg_type]
    field_strategies = {}
    for name, spec in schema.items():
        if spec.values is not None:
            value = st.sampled_from(spec.values)
        elif spec.kind == "str":
            value = st.text(max_size=20)
        elif spec.kind == "int":
            value = st.integers(0, 2**31)
        elif spec.kind == "num":
            value = st.one_of(st.integers(0, 10**6),
                              st.floats(0, 1e6, allow_nan=False))
        elif spec.kind == "list":
            value = st.lists(json_values, max_size=3)
        else:
            value = st.dictionaries(st.text(max_size=8), json_values, max_size=4)
        field_strategies[name] = value
    required = {n for n, s in schema.items() if s.required}
    optional = set(schema) - required

    @st.composite
    def build(draw):
        payload = {name: draw(field_strategies[name]) for name in required}
        for name in sorted(optional):
            if draw(st.booleans()):
                payload[name] = draw(field_strategies[name])
        if msg_type in proto.RTC_TYPES and draw(st.booleans()):
            payload["blob"] = draw(json_values)
        return payload

    return build()


envelopes = st.sampled_from(sorted(proto.MESSAGE_TYPES)).flatmap(
    lambda t: st.tuples(st.just(t), _payload_strategy(t), st.integers(0, 2**32)))


@settings(max_examples=500, deadline=None)
@given(envelopes)
def test_encode_decode_roundtrip(spec):
    msg_type, payload, seq = spec
    envelope = proto.Envelope(type=msg_type, seq=seq, payload=payload)
    assert proto.decode(proto.encode(envelope)) == envelope


@settings(max_examples=200, deadline=None)
@given(envelopes)
def test_encode_is_single_json_object(spec):
    msg_type, payload, seq = spec
    text = proto.encode(proto.Envelope(type=msg_type, seq=seq, payload=payload))
    obj = json.loads(text)
    assert set(obj) == {"v", "type", "seq", "payload"}


def test_schema_table_mentions_every_type():
    table = proto.schema_table_markdown()
    for msg_type in proto.MESSAGE_TYPES:
        assert f"## {msg_type}" in table
