"""Writes the demo corpus, mock script and config used by the CLI smoke test."""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

LINES = [
    "おはようございます。今日の授業はどうでしたか",
    "少し難しかったけど、楽しかったです",
    "宿題を忘れてしまって本当にすみません",
    "次からは気をつけましょうね",
    "テストの点数が思ったより悪くて落ち込んでいます",
    "大丈夫、一緒に復習すればきっと伸びますよ",
    "なんで僕だけ掃除当番なんですか",
    "順番で決まっているので、今週はお願いします",
    "文化祭の準備、すごく楽しみです",
    "クラスのみんなで協力すれば成功しますね",
    "昨日から頭が痛くて眠れませんでした",
    "無理をしないで、保健室で休んでください",
]
LABELS = ["Neutral", "Happy", "Angry", "Sad"]
INTENTIONS = ["挨拶", "質問", "共感", "同意", "感謝", "説明", "提案", "励まし", "謝罪", "確認"]
EMOTIONS = ["喜び", "期待", "怒り", "悲しみ", "驚き", "信頼", "中立", "不安"]
STYLES = ["明るい", "丁寧", "穏やか", "元気", "クール", "知的"]


def plan(n, size=5, stride=2):
    out, start = [], 1
    while True:
        end = min(start + size - 1, n)
        out.append((start, end))
        if start + size - 1 >= n:
            return out
        start += stride


def main():
    rng = random.Random(7)
    dialogues = []
    for i, n in enumerate([4, 10, 7, 12, 4, 9]):
        turns = []
        for t in range(1, n + 1):
            turn = {"index": t, "speaker": "先生" if t % 2 else "はるか", "content": LINES[(i * 3 + t) % len(LINES)]}
            if rng.random() < 0.9:
                turn["emotion"] = rng.choice(LABELS)
            turns.append(turn)
        dialogues.append({"id": f"demo{i:02d}", "setting": "放課後の教室での先生と生徒の会話", "turns": turns})

    script = []
    for d in dialogues:
        for k, (s, e) in enumerate(plan(len(d["turns"]))):
            key = f"{d['id']}:{s}-{e}"
            if d["id"] == "demo01" and k == 1:
                script.append({"key": key, "failure": "simulated timeout"})
            if d["id"] == "demo03" and k == 2:
                for _ in range(3):
                    script.append({"key": key, "answer": "申し訳ありませんが、お答えできません。"})
                continue
            lines = [
                f"{t}: {rng.choice(INTENTIONS)} / {rng.choice(EMOTIONS)} / {rng.choice(STYLES)}"
                for t in range(s, e + 1)
            ]
            script.append({"key": key, "answer": "\n".join(lines) + "\n"})

    with open(HERE / "dialogues.jsonl", "w", encoding="utf-8") as f:
        for d in dialogues:
            f.write(json.dumps(d, ensure_ascii=False) + "\n")
    with open(HERE / "script.jsonl", "w", encoding="utf-8") as f:
        for s in script:
            f.write(json.dumps(s, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
