"""Random instance builders shared by the evaluation and acceptance tests."""
from czoom.dataset import Annotation, AnnotatedImage, Category, Dataset
from czoom.geometry import Box, Detection, ImageExtent


def make_gt(boxes_by_image, crowd=(), n_cats=1):
    """``boxes_by_image``: {image_id: [(category, box), ...]}; ``crowd``: annotation ids flagged crowd."""
    images, anns = [], []
    for img_id, items in boxes_by_image.items():
        images.append(AnnotatedImage(img_id, f"{img_id}.png", ImageExtent(1000, 1000)))
        for cat, box in items:
            ann_id = len(anns) + 1
            anns.append(Annotation(ann_id, img_id, cat, box, box.area, ann_id in crowd))
    return Dataset(images, anns, [Category(c, f"c{c}") for c in range(1, n_cats + 1)])


def random_instance(rng, n_images=3, max_boxes=20):
    total = rng.randint(0, max_boxes)
    gt = {i: [] for i in range(1, n_images + 1)}
    crowd = set()
    dets = []
    for _ in range(total):
        img = rng.randint(1, n_images)
        side = rng.choice([rng.uniform(5, 30), rng.uniform(32, 96), rng.uniform(97, 150)])
        x, y = rng.uniform(0, 600), rng.uniform(0, 600)
        cat = rng.randint(1, 2)
        box = Box(x, y, x + side, y + side * rng.uniform(0.6, 1.4))
        gt[img].append((cat, box))
        if rng.random() < 0.1:
            crowd.add(sum(len(v) for v in gt.values()))
        for _ in range(rng.choice([0, 1, 1, 2])):
            j = side * 0.3
            jb = Box(box.x1 + rng.uniform(-j, j), box.y1 + rng.uniform(-j, j),
                     box.x2 + rng.uniform(-j, j), box.y2 + rng.uniform(-j, j))
            dets.append(Detection(img, cat, jb, round(rng.random(), 1)))
    for _ in range(rng.randint(0, 5)):
        x, y, s = rng.uniform(0, 800), rng.uniform(0, 800), rng.uniform(4, 120)
        dets.append(Detection(rng.randint(1, n_images), rng.randint(1, 2), Box(x, y, x + s, y + s),
                              round(rng.random(), 1)))
    # crowd holds annotation ids, which are assigned image by image in make_gt
    ds = make_gt(gt, crowd=crowd, n_cats=2)
    return ds, dets
